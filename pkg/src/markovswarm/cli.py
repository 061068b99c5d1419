"""Command line entry point: ``markovswarm {grid,synthesize,simulate}``.

Exit codes: 0 success, 2 input error, 3 numerical or algorithmic failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgio
from .core import (
    build_moore_grid,
    check_sparsity_match,
    is_irreducible,
    normalize_adjacency,
    stationary_distribution,
    stationary_residual,
)
from .errors import ConfigError, SwarmError
from .simulator import broadcast_kernel, detect_oscillation, run_scenario

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("markovswarm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _overrides(cfg, args):
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "gain_source", None):
        changes["gain_source"] = args.gain_source
    if getattr(args, "gain_ceiling", None) is not None:
        changes["gain_ceiling"] = args.gain_ceiling
    if getattr(args, "mode", None):
        mode, n = cfgio.parse_mode(args.mode)
        changes["mode"] = mode
        if n:
            changes["n_agents"] = n
    return dataclasses.replace(cfg, **changes) if changes else cfg


def cmd_grid(args) -> int:
    if args.rows < 1 or args.cols < 1:
        print("error: rows and cols must be positive", file=sys.stderr)
        return EXIT_INPUT
    g = build_moore_grid(args.rows, args.cols)
    text = cfgio.dump_graph_document(g, normalize_adjacency(g))
    _emit(text, args.out)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    cfg, output = cfgio.load_scenario(args.config)
    cfg = _overrides(cfg, args)
    P_star, gain = broadcast_kernel(cfg)
    base = cfg.kernel if cfg.kernel is not None else normalize_adjacency(cfg.graph)
    residual = stationary_residual(cfg.target, P_star)
    text = cfgio.dump_synthesis_document(
        P_star, gain, residual,
        sparsity_ok=check_sparsity_match(P_star, base),
        irreducible=is_irreducible(P_star),
        target=cfg.target, source=cfg.gain_source,
    )
    _emit(text, args.out or output.get("kernel"))
    err = float(np.abs(stationary_distribution(P_star) - cfg.target).max())
    print(f"tasks={cfg.graph.num_tasks} stationary_residual={residual:.3e} target_error={err:.3e}")
    return EXIT_OK


def _simulate_one(cfg, out_csv, per_state: bool) -> int:
    trace = run_scenario(cfg)
    if out_csv:
        trace.to_csv(out_csv, per_state=per_state)
    if len(trace) == 0:
        print(f"error: {trace.aborted}", file=sys.stderr)
        return EXIT_NUMERIC
    window = min(50, len(trace) // 2)
    osc = detect_oscillation(trace, window=window) if window >= 1 else None
    print(
        f"epochs={len(trace)} final_error_inf={trace.error_inf[-1]:.6e} "
        f"final_activity={trace.activity[-1]:.6f} "
        f"oscillating={'true' if osc and osc.oscillating else 'false'}"
    )
    if trace.aborted:
        print(f"error: {trace.aborted}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_simulate(args) -> int:
    src = Path(args.config)
    if src.is_dir():
        out_dir = Path(args.out) if args.out else src
        out_dir.mkdir(parents=True, exist_ok=True)
        status = EXIT_OK
        for path in sorted(src.glob("*.yaml")):
            print(f"[{path.name}]")
            try:
                cfg, output = cfgio.load_scenario(path)
                cfg = _overrides(cfg, args)
                code = _simulate_one(cfg, out_dir / (path.stem + ".csv"), output.get("per_state", True))
            except ConfigError as exc:
                print(f"error: {exc}", file=sys.stderr)
                code = EXIT_INPUT
            status = max(status, code)
        return status
    cfg, output = cfgio.load_scenario(src)
    cfg = _overrides(cfg, args)
    return _simulate_one(cfg, args.out or output.get("csv"), output.get("per_state", True))


def _emit(text: str, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="markovswarm", description="Markov-kernel swarm distribution control.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("grid", help="emit a Moore-grid task graph and its uniform kernel")
    g.add_argument("rows", type=int)
    g.add_argument("cols", type=int)
    g.add_argument("--out", help="output file (default: stdout)")
    g.set_defaults(func=cmd_grid)

    for name, func, helptext in (
        ("synthesize", cmd_synthesize, "synthesise the broadcast kernel for a scenario"),
        ("simulate", cmd_simulate, "run a scenario and write its trace CSV"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="scenario YAML (simulate: or a directory)")
        s.add_argument("--out", help="output path (overrides the config's output section)")
        s.add_argument("--seed", type=int)
        s.add_argument("--gain-source", choices=("stationary", "initial"))
        s.add_argument("--gain-ceiling", type=float)
        if name == "simulate":
            s.add_argument("--mode", help="meanfield or agents:N")
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SwarmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
