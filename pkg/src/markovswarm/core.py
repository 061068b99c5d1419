"""Task graphs, stochastic matrices and stationary distributions.

Matrices and vectors are plain float64 numpy arrays (dense, row-major);
the ``check_*`` helpers validate them at module boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence

ROW_TOL = 1e-9
STATIONARY_TOL = 1e-10


@dataclass(frozen=True)
class TaskGraph:
    """Digraph of tasks; ``edges[i, j]`` means an agent may hop from i to j."""

    edges: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.array(self.edges, dtype=bool)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] < 1:
            raise ValueError(f"edges must be a non-empty square matrix, got shape {e.shape}")
        if not e.diagonal().all():
            missing = np.flatnonzero(~e.diagonal()).tolist()
            raise ValueError(f"self-loops required on every task; missing at {missing}")
        if not _strongly_connected(e):
            raise ValueError("task graph is not strongly connected")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def num_tasks(self) -> int:
        return self.edges.shape[0]

    def degree(self) -> np.ndarray:
        """Out-degree of every task, self-loop included."""
        return self.edges.sum(axis=1)

    def __eq__(self, other):
        return isinstance(other, TaskGraph) and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash(self.edges.tobytes())


@dataclass(frozen=True)
class SwarmState:
    fractions: np.ndarray
    agent_counts: np.ndarray | None = None

    @classmethod
    def from_counts(cls, counts) -> "SwarmState":
        counts = np.asarray(counts, dtype=np.int64)
        if (counts < 0).any() or counts.sum() <= 0:
            raise ValueError("agent counts must be non-negative with a positive total")
        return cls(counts / counts.sum(), counts)


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = np.flatnonzero(adj[frontier].any(axis=0) & ~seen)
        seen[nxt] = True
        frontier = nxt.tolist()
    return seen


def _strongly_connected(adj: np.ndarray) -> bool:
    return bool(_reachable(adj, 0).all() and _reachable(adj.T, 0).all())


def check_stochastic(P, tol: float = ROW_TOL) -> np.ndarray:
    """Return ``P`` as a float array, raising ValueError unless it is row-stochastic."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {P.shape}")
    if not np.isfinite(P).all():
        raise ValueError("matrix has non-finite entries")
    if (P < 0).any() or (P > 1 + tol).any():
        raise ValueError("matrix entries must lie in [0, 1]")
    dev = np.abs(P.sum(axis=1) - 1.0)
    if (dev > tol).any():
        row = int(dev.argmax())
        raise ValueError(f"row {row} sums to {P[row].sum()!r}, not 1")
    return P


def check_probability(p, tol: float = ROW_TOL, strictly_positive: bool = False) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError(f"expected a non-empty vector, got shape {p.shape}")
    if not np.isfinite(p).all():
        raise ValueError("vector has non-finite entries")
    bad = np.flatnonzero(p <= 0) if strictly_positive else np.flatnonzero(p < 0)
    if bad.size:
        kind = "positive" if strictly_positive else "non-negative"
        raise ValueError(f"entry {int(bad[0])} is {p[bad[0]]!r}; all entries must be {kind}")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"entries sum to {p.sum()!r}, not 1")
    return p


def build_moore_grid(rows: int, cols: int) -> TaskGraph:
    """Grid of ``rows * cols`` tasks, each linked to its 8-neighbourhood and itself.

    Task ``r * cols + c`` sits at row r, column c.
    """
    if rows < 1 or cols < 1:
        raise ValueError("grid dimensions must be positive")
    r, c = np.divmod(np.arange(rows * cols), cols)
    edges = (np.abs(r[:, None] - r[None, :]) <= 1) & (np.abs(c[:, None] - c[None, :]) <= 1)
    return TaskGraph(edges)


def normalize_adjacency(g: TaskGraph) -> np.ndarray:
    """Uniform random walk on ``g``: each allowed hop (self included) gets 1/deg."""
    E = g.edges.astype(float)
    return E / E.sum(axis=1, keepdims=True)


def is_irreducible(P, pattern: TaskGraph | None = None) -> bool:
    """Strong connectivity of the positive-entry digraph of ``P``.

    ``pattern`` is only used to check dimensions.
    """
    P = np.asarray(P)
    if pattern is not None and pattern.num_tasks != P.shape[0]:
        raise ValueError("matrix and task graph dimensions differ")
    return _strongly_connected(P > 0)


def check_sparsity_match(P, ref) -> bool:
    P, ref = np.asarray(P), np.asarray(ref)
    if P.shape != ref.shape:
        raise ValueError("shape mismatch")
    return bool(np.array_equal(P > 0, ref > 0))


def stationary_residual(pi, P) -> float:
    return float(np.abs(pi @ P - pi).max())


def stationary_distribution(P, tol: float = STATIONARY_TOL, max_iter: int = 100_000) -> np.ndarray:
    """Left Perron vector of an irreducible stochastic matrix.

    Solves ``(P.T - I) pi = 0`` with the last equation replaced by the
    normalisation ``sum(pi) = 1``. If that system is singular or the residual
    is above ``tol``, falls back to power iteration on the aperiodic
    ``(P + I) / 2``, which has the same stationary vector.
    """
    P = np.asarray(P, dtype=float)
    M = P.shape[0]
    if M == 1:
        return np.ones(1)

    A = P.T - np.eye(M)
    A[-1, :] = 1.0
    rhs = np.zeros(M)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        pi = None
    if pi is not None and (pi > 0).all() and stationary_residual(pi, P) <= tol:
        return pi

    lazy = 0.5 * (P + np.eye(M))
    pi = np.full(M, 1.0 / M)
    for _ in range(max_iter):
        pi = pi @ lazy
        pi /= pi.sum()
        if stationary_residual(pi, P) <= tol:
            return pi
    raise NonConvergence(
        f"stationary residual {stationary_residual(pi, P):.3e} above {tol:.1e} "
        f"after {max_iter} iterations"
    )
