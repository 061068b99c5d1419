"""YAML scenario files and matrix/graph documents.

A scenario file has the sections ``graph``, ``initial``, ``target``,
``controller``, ``run`` and ``output``; see README.md for the full schema.
Field errors carry the dotted field path and the source line.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .core import TaskGraph, build_moore_grid, check_stochastic
from .errors import ConfigError
from .measure import BetaSchedule, FeedbackParams
from .simulator import DEFAULT_SEED, ScenarioConfig

SECTIONS = ("graph", "initial", "target", "controller", "run", "output")


class _Doc:
    """Parsed mapping plus the YAML node tree, for line lookups."""

    def __init__(self, text: str, source: str = "<config>"):
        try:
            self.node = yaml.compose(text)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            raise ConfigError(f"{source}: invalid YAML ({getattr(exc, 'problem', exc)})", line=line) from exc
        if self.data is None:
            self.data = {}
        if not isinstance(self.data, dict):
            raise ConfigError(f"{source}: top level must be a mapping", line=1)

    def line(self, path) -> int | None:
        node = self.node
        best = node.start_mark.line + 1 if node is not None else None
        for key in path:
            if isinstance(node, yaml.MappingNode):
                nxt = next((v for k, v in node.value if k.value == key), None)
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                nxt = node.value[key]
            else:
                nxt = None
            if nxt is None:
                break
            node = nxt
            best = node.start_mark.line + 1
        return best

    def error(self, path, message):
        field = ".".join(str(p) for p in path)
        return ConfigError(message, field=field, line=self.line(path))


def _get(doc: _Doc, path, default=..., kind=None):
    cur = doc.data
    for key in path:
        if not isinstance(cur, dict) or key not in cur:
            if default is ...:
                raise doc.error(path, "missing required field")
            return default
        cur = cur[key]
    if kind is not None and cur is not None:
        try:
            if kind is int and (isinstance(cur, bool) or float(cur) != int(cur)):
                raise ValueError
            cur = kind(cur)
        except (TypeError, ValueError):
            raise doc.error(path, f"expected {kind.__name__}, got {cur!r}") from None
    return cur


def _vector(doc: _Doc, path, n: int, positive: bool) -> np.ndarray:
    raw = _get(doc, path)
    if not isinstance(raw, list) or len(raw) != n:
        raise doc.error(path, f"expected a list of {n} numbers")
    try:
        v = np.array([float(x) for x in raw])
    except (TypeError, ValueError):
        raise doc.error(path, "entries must be numbers") from None
    for i, x in enumerate(v):
        if not np.isfinite(x) or x < 0 or (positive and x <= 0):
            need = "strictly positive" if positive else "non-negative"
            raise doc.error(list(path) + [i], f"entry {i} is {x!r}; must be {need}")
    if abs(v.sum() - 1.0) > 1e-9:
        raise doc.error(path, f"entries sum to {v.sum()!r}, not 1")
    return v


def _matrix(doc: _Doc, path) -> np.ndarray:
    raw = _get(doc, path)
    try:
        A = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise doc.error(path, "expected a square list of number lists") from None
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise doc.error(path, "expected a square list of number lists")
    return A


def _graph(doc: _Doc, base: Path):
    """TaskGraph and optional explicit initial kernel."""
    sec = _get(doc, ["graph"])
    if not isinstance(sec, dict):
        raise doc.error(["graph"], "expected a mapping")
    kernel = None
    if "file" in sec:
        ref = base / str(sec["file"])
        try:
            g, kernel = load_graph_document(ref.read_text(), str(ref))
        except OSError as exc:
            raise doc.error(["graph", "file"], f"cannot read {ref}: {exc.strerror}") from None
        return g, kernel
    if "grid" in sec:
        dims = sec["grid"]
        if not (isinstance(dims, list) and len(dims) == 2
                and all(isinstance(x, int) and not isinstance(x, bool) and x >= 1 for x in dims)):
            raise doc.error(["graph", "grid"], "expected [rows, cols] with positive integers")
        g = build_moore_grid(*dims)
    elif "edges" in sec:
        E = _matrix(doc, ["graph", "edges"])
        try:
            g = TaskGraph(E != 0)
        except ValueError as exc:
            raise doc.error(["graph", "edges"], str(exc)) from None
    else:
        raise doc.error(["graph"], "need one of 'grid', 'edges' or 'file'")
    if "kernel" in sec:
        kernel = _matrix(doc, ["graph", "kernel"])
        try:
            check_stochastic(kernel)
        except ValueError as exc:
            raise doc.error(["graph", "kernel"], str(exc)) from None
        if kernel.shape[0] != g.num_tasks:
            raise doc.error(["graph", "kernel"], "kernel and graph dimensions differ")
    return g, kernel


def _distribution(doc: _Doc, section: str, M: int, positive: bool) -> np.ndarray:
    sec = _get(doc, [section])
    if not isinstance(sec, dict):
        raise doc.error([section], "expected a mapping")
    if "task" in sec:
        i = _get(doc, [section, "task"], kind=int)
        if not 0 <= i < M:
            raise doc.error([section, "task"], f"task index {i} outside 0..{M - 1}")
        if positive and M > 1:
            raise doc.error([section, "task"], "a one-hot target has zero entries")
        v = np.zeros(M)
        v[i] = 1.0
        return v
    if sec.get("uniform"):
        return np.full(M, 1.0 / M)
    if "distribution" in sec:
        return _vector(doc, [section, "distribution"], M, positive)
    raise doc.error([section], "need one of 'task', 'uniform' or 'distribution'")


def _feedback(doc: _Doc) -> FeedbackParams:
    c = ["controller"]
    sched = _get(doc, c + ["beta"], default={}) or {}
    if not isinstance(sched, dict):
        raise doc.error(c + ["beta"], "expected a mapping")
    try:
        schedule = BetaSchedule(
            kind=str(sched.get("kind", "constant")),
            gamma=_get(doc, c + ["beta", "gamma"], default=600.0, kind=float),
            horizon=_get(doc, c + ["beta", "horizon"], default=100, kind=int),
        )
    except ValueError as exc:
        raise doc.error(c + ["beta"], str(exc)) from None
    try:
        return FeedbackParams(
            theta=_get(doc, c + ["theta"], default=0.02, kind=float),
            lam=_get(doc, c + ["lambda"], default=0.2, kind=float),
            schedule=schedule,
            measure_tol=_get(doc, c + ["measure_tol"], default=1e-10, kind=float),
            measure_max_iter=_get(doc, c + ["measure_max_iter"], default=None, kind=int),
        )
    except ValueError as exc:
        raise doc.error(c, str(exc)) from None


def parse_scenario(text: str, source: str = "<config>", base: Path | None = None):
    """Parse a scenario document into ``(ScenarioConfig, output_options)``."""
    doc = _Doc(text, source)
    for key in doc.data:
        if key not in SECTIONS:
            raise doc.error([key], f"unknown section; expected {', '.join(SECTIONS)}")
    base = base or Path(".")
    graph, kernel = _graph(doc, base)
    M = graph.num_tasks
    initial = _distribution(doc, "initial", M, positive=False)
    target = _distribution(doc, "target", M, positive=True)

    kind = _get(doc, ["controller", "kind"], default="central")
    if kind not in ("central", "distributed"):
        raise doc.error(["controller", "kind"], f"unknown controller {kind!r}")
    feedback = _feedback(doc) if kind == "distributed" else None
    gain_source = _get(doc, ["controller", "gain_source"], default="stationary")
    if gain_source not in ("stationary", "initial"):
        raise doc.error(["controller", "gain_source"], "expected 'stationary' or 'initial'")
    ceiling = _get(doc, ["controller", "gain_ceiling"], default=None, kind=float)
    if ceiling is not None and not 0 < ceiling < 1:
        raise doc.error(["controller", "gain_ceiling"], "must lie in (0, 1)")

    epochs = _get(doc, ["run", "epochs"], default=500, kind=int)
    if epochs < 1:
        raise doc.error(["run", "epochs"], "must be at least 1")
    mode, n_agents = parse_mode(str(_get(doc, ["run", "mode"], default="meanfield")),
                                lambda msg: doc.error(["run", "mode"], msg))
    if "agents" in (doc.data.get("run") or {}):
        n_agents = _get(doc, ["run", "agents"], kind=int)
    seed = _get(doc, ["run", "seed"], default=DEFAULT_SEED, kind=int)
    fsrc = _get(doc, ["run", "feedback_source"], default="observed")
    if fsrc not in ("observed", "meanfield"):
        raise doc.error(["run", "feedback_source"], "expected 'observed' or 'meanfield'")
    if mode == "agents" and n_agents < 1:
        raise doc.error(["run", "agents"], "agent mode needs a positive agent count")

    output = doc.data.get("output") or {}
    if not isinstance(output, dict):
        raise doc.error(["output"], "expected a mapping")

    cfg = ScenarioConfig(
        graph=graph, initial=initial, target=target, controller=kind, feedback=feedback,
        epochs=epochs, kernel=kernel, gain_source=gain_source, gain_ceiling=ceiling,
        mode=mode, n_agents=n_agents, seed=seed, feedback_source=fsrc,
    )
    return cfg, dict(output)


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text, str(path), path.parent)


def parse_mode(spec: str, fail=None):
    """``meanfield`` or ``agents:N`` -> ``(mode, n_agents)``."""
    fail = fail or (lambda msg: ConfigError(msg, field="mode"))
    if spec == "meanfield":
        return "meanfield", 0
    if spec == "agents":
        return "agents", 0
    if spec.startswith("agents:"):
        try:
            n = int(spec.split(":", 1)[1])
        except ValueError:
            raise fail(f"bad agent count in {spec!r}") from None
        if n < 1:
            raise fail("agent count must be positive")
        return "agents", n
    raise fail(f"expected 'meanfield' or 'agents:N', got {spec!r}")


# graph / kernel documents ---------------------------------------------------

def _rows(A) -> list:
    return [[float(x) for x in row] for row in np.asarray(A, dtype=float)]


def dump_graph_document(g: TaskGraph, kernel) -> str:
    doc = {
        "num_tasks": g.num_tasks,
        "edges": [[int(x) for x in row] for row in g.edges],
        "kernel": _rows(kernel),
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=10_000)


def load_graph_document(text: str, source: str = "<graph>"):
    doc = _Doc(text, source)
    E = _matrix(doc, ["edges"])
    n = _get(doc, ["num_tasks"], default=E.shape[0], kind=int)
    if n != E.shape[0]:
        raise doc.error(["num_tasks"], f"says {n} but edges are {E.shape[0]}x{E.shape[0]}")
    try:
        g = TaskGraph(E != 0)
    except ValueError as exc:
        raise doc.error(["edges"], str(exc)) from None
    kernel = None
    if "kernel" in doc.data:
        kernel = _matrix(doc, ["kernel"])
        if kernel.shape[0] != n:
            raise doc.error(["kernel"], "kernel and graph dimensions differ")
    return g, kernel


def dump_synthesis_document(P_star, gain, residual: float, sparsity_ok: bool,
                            irreducible: bool, target, source: str) -> str:
    doc = {
        "num_tasks": int(np.asarray(P_star).shape[0]),
        "gain_source": source,
        "target": [float(x) for x in target],
        "gain": [float(x) for x in gain],
        "stationary_residual": float(residual),
        "sparsity_ok": bool(sparsity_ok),
        "irreducible": bool(irreducible),
        "kernel": _rows(P_star),
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=10_000)


def load_synthesis_document(text: str) -> dict:
    data = yaml.safe_load(text)
    data["kernel"] = np.array(data["kernel"], dtype=float)
    data["gain"] = np.array(data["gain"], dtype=float)
    return data
