"""Command line benchmark runner.

Exit codes: 0 success, 2 parse/usage error, 3 no run produced a solution.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import ALGORITHMS, BenchConfig, emit_results, rows_of, run_benchmark
from .engine import RunParams
from .io import ParseError, load_map, load_scen


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _algo_list(text: str) -> list[str]:
    algos = [a.strip() for a in text.split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown algorithm(s) {bad}; choose from {list(ALGORITHMS)}")
    return algos


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mapf-lns", description="Run anytime MAPF-LNS engines on MovingAI benchmarks.")
    p.add_argument("--map", required=True, type=Path)
    p.add_argument("--scen", required=True, type=Path)
    p.add_argument("--agents", required=True, type=_int_list, help="comma list of agent counts")
    p.add_argument("--algo", default="drop", type=_algo_list, help="comma list of sequential,drop,sync,deta")
    p.add_argument("--time-budget", type=float, default=60.0)
    p.add_argument("--neighborhood", type=int, default=16)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--threads", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--iteration-cap", type=int, default=None)
    p.add_argument("--node-budget", type=int, default=None)
    p.add_argument("--backend", choices=("thread", "process", "auto"), default="thread")
    p.add_argument("--out", type=Path, default=Path("results.csv"))
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--convergence-dir", type=Path, default=None)
    p.add_argument("--figures-dir", type=Path, default=None, help="render PNG figures here")
    p.add_argument("--validate", action="store_true", help="validate every accepted solution")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        grid = load_map(args.map)
        entries = load_scen(args.scen, grid)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"cannot read input: {e}", file=sys.stderr)
        return 2
    try:
        params = RunParams(
            time_budget=args.time_budget,
            neighborhood_size=args.neighborhood,
            gamma=args.gamma,
            threads=args.threads,
            seed=args.seed,
            node_budget=args.node_budget,
            iteration_cap=args.iteration_cap,
            backend=args.backend,
            validate=args.validate,
        )
        config = BenchConfig(
            grid, entries, args.agents, args.algo, params, args.reps,
            map_name=args.map.stem, scen_name=args.scen.stem,
            convergence_dir=args.convergence_dir,
        )
    except ValueError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 2

    def progress(row) -> None:
        logging.info(
            "%s k=%d seed=%d: %s soc=%s", row.algorithm, row.k, row.seed, row.termination, row.final_soc
        )

    runs = run_benchmark(config, progress)
    emit_results(rows_of(runs), args.out, args.format)
    if args.figures_dir is not None:
        from .report import render_figures

        render_figures(runs, args.figures_dir)
    if not any(r.row.final_soc is not None for r in runs):
        print("no run produced a solution", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
