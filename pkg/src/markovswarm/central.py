"""Broadcast kernel synthesis: make a target distribution stationary.

The transform ``D P - D + I`` keeps the support of ``P`` and rescales the
stationary vector by ``D^{-1}``, so choosing ``d_i`` proportional to
``pi_i / target_i`` moves the stationary point onto the target.
"""

from __future__ import annotations

import numpy as np

from .core import (
    STATIONARY_TOL,
    check_probability,
    check_sparsity_match,
    check_stochastic,
    stationary_distribution,
)
from .errors import DegenerateDimension, GainOutOfRange, NonConvergence, SparsityViolation


def gain_from_distributions(pi_source, p_target, ceiling: float | None = None) -> np.ndarray:
    """Diagonal gain vector ``d`` with ``d_i`` proportional to ``pi_i / target_i``.

    With ``ceiling=None`` the ratios are normalised to sum to one. Otherwise
    they are scaled so that ``max(d) == ceiling``; any positive scaling keeps
    the resulting stationary vector, the ceiling only sets how fast the
    broadcast kernel mixes.
    """
    pi_source = np.asarray(pi_source, dtype=float)
    p_target = check_probability(p_target, strictly_positive=True)
    if pi_source.shape != p_target.shape:
        raise ValueError("source and target dimensions differ")
    if p_target.size == 1:
        raise DegenerateDimension("a single task admits no gain in (0, 1)")
    if (pi_source <= 0).any():
        idx = int(np.flatnonzero(pi_source <= 0)[0])
        raise GainOutOfRange(f"source distribution is zero at task {idx}; gain would vanish")

    ratio = pi_source / p_target
    if ceiling is None:
        return ratio / ratio.sum()
    if not 0.0 < ceiling < 1.0:
        raise ValueError(f"gain ceiling must lie in (0, 1), got {ceiling}")
    return ceiling * (ratio / ratio.max())


def _lazy_mix(P: np.ndarray, d: np.ndarray) -> np.ndarray:
    # d_i P_ij off the diagonal, d_i P_ii + (1 - d_i) on it
    out = d[:, None] * P
    out[np.diag_indices_from(out)] += 1.0 - d
    return out


def apply_gain(P, d) -> np.ndarray:
    """Return ``diag(d) P - diag(d) + I``; requires every ``d_i`` in (0, 1)."""
    P = np.asarray(P, dtype=float)
    d = np.asarray(d, dtype=float)
    if d.shape != (P.shape[0],):
        raise ValueError("gain and matrix dimensions differ")
    out_of_range = np.flatnonzero((d <= 0) | (d >= 1))
    if out_of_range.size:
        i = int(out_of_range[0])
        raise GainOutOfRange(f"gain at task {i} is {d[i]!r}, outside (0, 1)")
    return _lazy_mix(P, d)


def synthesize_central(
    P,
    p_target,
    tol: float = 1e-8,
    *,
    ceiling: float | None = None,
    pi_source=None,
    return_gain: bool = False,
):
    """Broadcast kernel with support of ``P`` whose stationary vector is ``p_target``.

    ``pi_source`` overrides the stationary vector of ``P`` as the numerator of
    the gain ratio (e.g. the initial swarm distribution); in that case the
    stationarity guarantee no longer holds and is not checked.
    """
    P = check_stochastic(P)
    p_target = check_probability(p_target, strictly_positive=True)
    M = P.shape[0]
    if p_target.size != M:
        raise ValueError(f"target has {p_target.size} entries for a {M}-task kernel")
    if M == 1:
        return (P.copy(), np.ones(1)) if return_gain else P.copy()
    zero_diag = np.flatnonzero(P.diagonal() <= 0)
    if zero_diag.size:
        raise ValueError(
            f"kernel has zero self-transition at task {int(zero_diag[0])}; "
            "the synthesised kernel would gain support there"
        )

    literal = pi_source is None
    if literal:
        pi_source = stationary_distribution(P, tol=min(tol, STATIONARY_TOL))
    d = gain_from_distributions(pi_source, p_target, ceiling=ceiling)
    P_star = apply_gain(P, d)

    if not check_sparsity_match(P_star, P):
        raise SparsityViolation("synthesised kernel support differs from the input kernel")
    if literal:
        err = float(np.abs(stationary_distribution(P_star) - p_target).max())
        if err > tol:
            raise NonConvergence(f"stationary vector misses the target by {err:.3e} > {tol:.1e}")
    return (P_star, d) if return_gain else P_star
