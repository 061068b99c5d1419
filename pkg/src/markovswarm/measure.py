"""Language-measure feedback: state values, sigmoid activity and the perturbed kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .central import _lazy_mix
from .core import stationary_distribution
from .errors import GainOutOfRange, NonConvergence, SingularSystem

EXP_CLAMP = 700.0
ACTIVITY_EPS = 1e-12
DEFAULT_THETA = 0.02
MEASURE_TOL = 1e-10


@dataclass(frozen=True)
class BetaSchedule:
    """Sigmoid sharpness per epoch: ``constant``, ``inverse_k`` or ``exponential``."""

    kind: str = "constant"
    gamma: float = 600.0
    horizon: int = 100

    KINDS = ("constant", "inverse_k", "exponential")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown beta schedule {self.kind!r}; expected one of {self.KINDS}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.kind == "exponential" and not self.horizon >= 1:
            raise ValueError("decay horizon must be a positive integer")

    def beta_at(self, k: int) -> float:
        if k < 1:
            raise ValueError("epochs are counted from 1")
        if self.kind == "constant":
            return float(self.gamma)
        if self.kind == "inverse_k":
            return self.gamma / k
        return self.gamma * math.exp(-k / self.horizon)


def beta_at(schedule: BetaSchedule, k: int) -> float:
    return schedule.beta_at(k)


@dataclass(frozen=True)
class FeedbackParams:
    theta: float = DEFAULT_THETA
    lam: float = 0.2
    schedule: BetaSchedule = BetaSchedule()
    measure_tol: float = MEASURE_TOL
    measure_max_iter: int | None = None

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if not self.measure_tol > 0:
            raise ValueError("measure tolerance must be positive")


@dataclass(frozen=True)
class FeedbackDiagnostics:
    chi: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    b: np.ndarray
    beta: float
    sweeps: int


def _check_theta(theta):
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")


def measure_direct(P, chi, theta: float) -> np.ndarray:
    """``theta * inv(I - (1 - theta) P) @ chi`` via a dense solve."""
    _check_theta(theta)
    P = np.asarray(P, dtype=float)
    chi = np.asarray(chi, dtype=float)
    A = np.eye(P.shape[0]) - (1.0 - theta) * P
    try:
        nu = np.linalg.solve(A, theta * chi)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"measure system is singular: {exc}") from exc
    if not np.isfinite(nu).all():
        raise SingularSystem("measure solve produced non-finite values")
    return nu


def sweep_bound(chi_norm: float, theta: float, tol: float) -> int:
    """Sweeps needed for the fixed-point iteration to move less than ``tol``."""
    if chi_norm <= 0:
        return 1
    n = math.log(tol * theta / chi_norm) / math.log(1.0 - theta)
    return max(1, math.ceil(n) + 1)


def measure_iterative(
    P, chi, theta: float, tol: float = MEASURE_TOL, max_iter: int | None = None, *, return_sweeps=False
):
    """Synchronous fixed-point sweeps ``nu <- (1 - theta) P nu + theta chi`` from zero.

    Every task updates from the previous round's values only. Stops once the
    sup-norm change of a round is at most ``tol``.
    """
    _check_theta(theta)
    P = np.asarray(P, dtype=float)
    chi = np.asarray(chi, dtype=float)
    if max_iter is None:
        max_iter = 2 * sweep_bound(float(np.abs(chi).max()), theta, tol)
    keep = 1.0 - theta
    forcing = theta * chi
    nu = np.zeros_like(chi)
    for sweep in range(1, max_iter + 1):
        new = keep * (P @ nu) + forcing
        step = np.abs(new - nu).max()
        nu = new
        if step <= tol:
            return (nu, sweep) if return_sweeps else nu
    raise NonConvergence(f"measure iteration still moving by {step:.3e} after {max_iter} sweeps")


def cesaro_measure(P, chi) -> np.ndarray:
    """The theta -> 0 limit: every task gets the stationary average of ``chi``."""
    chi = np.asarray(chi, dtype=float)
    pi = stationary_distribution(P)
    return np.full_like(chi, pi @ chi)


def sigmoid_activity(mu, lam: float, beta: float):
    """``1 / (1 + (1/lam - 1) exp(-beta mu))``, equal to ``lam`` at ``mu == 0``.

    The exponent is clamped to +-700 and the output to [1e-12, 1 - 1e-12] so
    that the result always stays inside the open unit interval.
    """
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    mu = np.asarray(mu, dtype=float)
    x = np.clip(-beta * mu, -EXP_CLAMP, EXP_CLAMP)
    b = lam / (lam + (1.0 - lam) * np.exp(x))
    b = np.where(x == 0, lam, b)
    b = np.clip(b, ACTIVITY_EPS, 1.0 - ACTIVITY_EPS)
    return float(b) if b.ndim == 0 else b


def feedback_kernel(P_star, b) -> np.ndarray:
    """``diag(b) P* - diag(b) + I``: agents at task i follow ``P*`` with probability ``b_i``."""
    P_star = np.asarray(P_star, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.shape != (P_star.shape[0],):
        raise ValueError("activity vector and kernel dimensions differ")
    bad = np.flatnonzero((b <= 0) | (b >= 1))
    if bad.size:
        raise GainOutOfRange(f"activity at task {int(bad[0])} is {b[bad[0]]!r}, outside (0, 1)")
    return _lazy_mix(P_star, b)


def feedback_step(P_star, p_now, p_target, params: FeedbackParams, k: int):
    """One epoch of the distributed policy; returns ``(kernel, FeedbackDiagnostics)``."""
    if k < 1:
        raise ValueError("epochs are counted from 1")
    p_now = np.asarray(p_now, dtype=float)
    p_target = np.asarray(p_target, dtype=float)
    chi = p_target - p_now
    nu, sweeps = measure_iterative(
        P_star, chi, params.theta, params.measure_tol, params.measure_max_iter, return_sweeps=True
    )
    mu = nu - chi
    beta = params.schedule.beta_at(k)
    b = np.atleast_1d(sigmoid_activity(mu, params.lam, beta))
    return feedback_kernel(P_star, b), FeedbackDiagnostics(chi, nu, mu, b, beta, sweeps)


def second_eigenvalue_modulus(P) -> float:
    """Largest eigenvalue modulus after the unit one; reported, never enforced."""
    ev = np.sort(np.abs(np.linalg.eigvals(np.asarray(P, dtype=float))))[::-1]
    return float(ev[1]) if ev.size > 1 else 0.0
