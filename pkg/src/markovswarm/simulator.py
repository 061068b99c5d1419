"""Swarm propagation under central or distributed control, with trace diagnostics."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .central import synthesize_central
from .core import (
    ROW_TOL,
    TaskGraph,
    check_probability,
    check_stochastic,
    normalize_adjacency,
)
from .errors import SwarmError, TraceTooShort
from .measure import FeedbackParams, feedback_step

log = logging.getLogger(__name__)

DEFAULT_SEED = 20180501
ZETA_SLACK = 1e-12
DELTA_V_TOL = 1e-12
CSV_COLUMNS = ("k", "error_inf", "error_l2", "V", "delta_V", "activity", "beta", "sufficient_ok")


def step_meanfield(p, K) -> np.ndarray:
    """Row vector times kernel. Drift of the total mass beyond 1e-9 is logged and removed."""
    q = np.asarray(p, dtype=float) @ np.asarray(K, dtype=float)
    total = q.sum()
    if abs(total - 1.0) > ROW_TOL:
        log.warning("state mass drifted to %r; renormalising", total)
        q = q / total
    return q


def sample_transitions(counts, K, rng: np.random.Generator) -> np.ndarray:
    """Matrix of agent moves: entry (i, j) is how many of ``counts[i]`` went to j."""
    K = np.asarray(K, dtype=float)
    # multinomial rejects rows whose leading entries sum past 1 by a rounding error
    rows = np.clip(K, 0.0, None)
    rows = rows / rows.sum(axis=1, keepdims=True)
    return rng.multinomial(np.asarray(counts, dtype=np.int64), rows)


def step_agents(counts, K, rng: np.random.Generator) -> np.ndarray:
    """Move every agent independently according to its task's row of ``K``."""
    return sample_transitions(counts, K, rng).sum(axis=0)


def allocate_counts(p, n_agents: int) -> np.ndarray:
    """Largest-remainder rounding of ``n_agents * p`` to integers summing to ``n_agents``."""
    p = np.asarray(p, dtype=float)
    raw = p * n_agents
    counts = np.floor(raw).astype(np.int64)
    short = n_agents - int(counts.sum())
    if short:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def activity_level(p, K) -> float:
    """Expected fraction of agents that change task under ``K``."""
    return float(np.asarray(p, dtype=float) @ (1.0 - np.diagonal(np.asarray(K, dtype=float))))


@dataclass(frozen=True)
class LyapunovDiagnostics:
    V: float
    delta_V: float
    delta_V_expansion: float
    zeta: np.ndarray
    sufficient_ok: bool


def lyapunov_diagnostics(p_prev, p_now, p_target) -> LyapunovDiagnostics:
    """Squared-error Lyapunov value, its increment (two ways) and per-task zeta."""
    p_prev, p_now, p_target = (np.asarray(x, dtype=float) for x in (p_prev, p_now, p_target))
    e_now = p_target - p_now
    e_prev = p_target - p_prev
    V = float(e_now @ e_now)
    dV = V - float(e_prev @ e_prev)
    dV_exp = float((2 * p_target - p_now - p_prev) @ (p_prev - p_now))
    zeta = e_now * (e_now - e_prev)
    return LyapunovDiagnostics(V, dV, dV_exp, zeta, bool((zeta <= ZETA_SLACK).all()))


@dataclass(frozen=True)
class OscillationReport:
    oscillating: bool
    amplitude: float


def detect_oscillation(trace, window: int = 50, tol: float = 1e-3) -> OscillationReport:
    """Look at ``error_inf`` over the last ``2 * window`` epochs.

    Oscillating means the error is not monotonically non-increasing there,
    not entirely below ``tol``, and spans more than ``tol`` (max - min).
    ``trace`` is a SimulationTrace or a plain sequence of error values.
    """
    err = np.asarray(trace.error_inf if isinstance(trace, SimulationTrace) else trace, dtype=float)
    if window < 1:
        raise ValueError("window must be positive")
    if err.size < 2 * window:
        raise TraceTooShort(f"need {2 * window} epochs, trace has {err.size}")
    tail = err[-2 * window:]
    amplitude = float(tail.max() - tail.min())
    monotone = bool((np.diff(tail) <= 0).all())
    settled = bool((tail < tol).all())
    return OscillationReport(not monotone and not settled and amplitude > tol, amplitude)


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one run.

    ``initial`` and ``target`` are distributions over tasks. ``kernel``
    defaults to the uniform random walk on ``graph``. ``gain_ceiling=None``
    gives the sum-normalised gain; the paper-grid presets use 0.75.
    """

    graph: TaskGraph
    initial: np.ndarray
    target: np.ndarray
    controller: str = "central"
    feedback: FeedbackParams | None = None
    epochs: int = 500
    kernel: np.ndarray | None = None
    gain_source: str = "stationary"
    gain_ceiling: float | None = None
    mode: str = "meanfield"
    n_agents: int = 0
    seed: int = DEFAULT_SEED
    feedback_source: str = "observed"
    record_kernels: bool = False

    def __post_init__(self):
        M = self.graph.num_tasks
        self.initial = check_probability(self.initial)
        self.target = check_probability(self.target, strictly_positive=True)
        if self.initial.size != M or self.target.size != M:
            raise ValueError(f"initial/target must have {M} entries")
        if self.controller not in ("central", "distributed"):
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.controller == "distributed" and self.feedback is None:
            self.feedback = FeedbackParams()
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.kernel is not None:
            self.kernel = check_stochastic(self.kernel)
            if self.kernel.shape[0] != M:
                raise ValueError("kernel and graph dimensions differ")
        if self.gain_source not in ("stationary", "initial"):
            raise ValueError(f"unknown gain source {self.gain_source!r}")
        if self.mode not in ("meanfield", "agents"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "agents" and self.n_agents < 1:
            raise ValueError("agent mode needs a positive number of agents")
        if self.feedback_source not in ("observed", "meanfield"):
            raise ValueError(f"unknown feedback source {self.feedback_source!r}")


@dataclass
class SimulationTrace:
    """Per-epoch records; index ``k - 1`` holds epoch k (state after the k-th step)."""

    target: np.ndarray
    initial: np.ndarray
    P_star: np.ndarray
    gain: np.ndarray
    k: list = field(default_factory=list)
    states: list = field(default_factory=list)
    counts: list = field(default_factory=list)
    error_inf: list = field(default_factory=list)
    error_l2: list = field(default_factory=list)
    V: list = field(default_factory=list)
    delta_V: list = field(default_factory=list)
    activity: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    zeta: list = field(default_factory=list)
    sufficient_ok: list = field(default_factory=list)
    kernels: list = field(default_factory=list)
    aborted: str | None = None

    def __len__(self):
        return len(self.k)

    def record(self, k, p_prev, p_now, activity, beta, kernel=None, counts=None):
        lyap = lyapunov_diagnostics(p_prev, p_now, self.target)
        if abs(lyap.delta_V - lyap.delta_V_expansion) > DELTA_V_TOL:
            raise SwarmError(
                f"epoch {k}: Lyapunov increment mismatch "
                f"{lyap.delta_V!r} vs {lyap.delta_V_expansion!r}"
            )
        err = self.target - p_now
        self.k.append(k)
        self.states.append(p_now)
        self.error_inf.append(float(np.abs(err).max()))
        self.error_l2.append(float(np.sqrt(err @ err)))
        self.V.append(lyap.V)
        self.delta_V.append(lyap.delta_V)
        self.activity.append(float(activity))
        self.beta.append(float(beta))
        self.zeta.append(lyap.zeta)
        self.sufficient_ok.append(lyap.sufficient_ok)
        if kernel is not None:
            self.kernels.append(kernel)
        if counts is not None:
            self.counts.append(counts)

    def epochs_to(self, tol: float) -> int | None:
        """First epoch whose ``error_inf`` is at most ``tol``."""
        hits = np.flatnonzero(np.asarray(self.error_inf) <= tol)
        return int(self.k[hits[0]]) if hits.size else None

    def write_csv(self, fh, per_state: bool = True) -> None:
        M = self.target.size
        writer = csv.writer(fh, lineterminator="\n")
        header = list(CSV_COLUMNS)
        if per_state:
            header += [f"p_{i}" for i in range(M)]
        writer.writerow(header)
        for i in range(len(self.k)):
            row = [
                self.k[i],
                repr(self.error_inf[i]),
                repr(self.error_l2[i]),
                repr(self.V[i]),
                repr(self.delta_V[i]),
                repr(self.activity[i]),
                repr(self.beta[i]),
                int(self.sufficient_ok[i]),
            ]
            if per_state:
                row += [repr(float(x)) for x in self.states[i]]
            writer.writerow(row)

    def to_csv(self, path=None, per_state: bool = True) -> str:
        buf = io.StringIO()
        self.write_csv(buf, per_state)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def broadcast_kernel(cfg: ScenarioConfig):
    """``(P_star, gain)`` for the scenario's base kernel, target and gain options."""
    P = cfg.kernel if cfg.kernel is not None else normalize_adjacency(cfg.graph)
    source = cfg.initial if cfg.gain_source == "initial" else None
    return synthesize_central(
        P, cfg.target, ceiling=cfg.gain_ceiling, pi_source=source, return_gain=True
    )


def run_scenario(cfg: ScenarioConfig, kernels=None) -> SimulationTrace:
    """Propagate the swarm for ``cfg.epochs`` epochs.

    Kernels are applied chronologically: the state after epoch k is
    ``p0 K1 K2 ... Kk``. ``kernels`` replays a fixed kernel sequence instead
    of computing one per epoch (used to isolate agent sampling noise).

    A component failure mid-run stops the loop; the trace so far is returned
    with ``aborted`` set to the error message.
    """
    P_star, gain = broadcast_kernel(cfg)
    trace = SimulationTrace(cfg.target, cfg.initial, P_star, gain)
    rng = np.random.default_rng(cfg.seed)
    agents = cfg.mode == "agents"

    counts = allocate_counts(cfg.initial, cfg.n_agents) if agents else None
    p = counts / cfg.n_agents if agents else cfg.initial.copy()
    p_shadow = cfg.initial.copy()  # mean-field state driving feedback when requested

    for k in range(1, cfg.epochs + 1):
        try:
            beta = float("nan")
            if kernels is not None:
                K = kernels[k - 1]
            elif cfg.controller == "central":
                K = P_star
            else:
                observed = p_shadow if (agents and cfg.feedback_source == "meanfield") else p
                K, diag = feedback_step(P_star, observed, cfg.target, cfg.feedback, k)
                beta = diag.beta

            if agents:
                moves = sample_transitions(counts, K, rng)
                counts = moves.sum(axis=0)
                activity = 1.0 - np.trace(moves) / cfg.n_agents
                p_next = counts / cfg.n_agents
                p_shadow = step_meanfield(p_shadow, K)
            else:
                activity = activity_level(p, K)
                p_next = step_meanfield(p, K)

            trace.record(
                k, p, p_next, activity, beta,
                kernel=K if cfg.record_kernels else None,
                counts=counts.copy() if agents else None,
            )
            p = p_next
        except SwarmError as exc:
            log.error("run aborted at epoch %d: %s", k, exc)
            trace.aborted = f"epoch {k}: {exc}"
            break
    return trace
