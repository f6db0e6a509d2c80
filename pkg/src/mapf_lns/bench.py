"""Benchmark driver and machine-readable result files."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .engine import ENGINES, RunParams, RunResult
from .io import ScenarioEntry, instance_from_scenario
from .metrics import RunEventLog, summarize
from .model import GridMap, validate_solution

log = logging.getLogger(__name__)

ALGORITHMS = tuple(ENGINES)


@dataclass
class BenchConfig:
    grid: GridMap
    entries: list[ScenarioEntry]
    agent_counts: list[int]
    algorithms: list[str]
    params: RunParams = field(default_factory=RunParams)
    repetitions: int = 1
    map_name: str = ""
    scen_name: str = ""
    convergence_dir: Path | None = None

    def __post_init__(self) -> None:
        unknown = set(self.algorithms) - set(ENGINES)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")
        too_many = [k for k in self.agent_counts if k > len(self.entries)]
        if too_many:
            raise ValueError(
                f"agent counts {too_many} exceed the {len(self.entries)} scenario entries"
            )
        if self.repetitions < 1:
            raise ValueError("need at least one repetition")


@dataclass
class ResultRow:
    map: str
    scen: str
    algorithm: str
    k: int
    m: int
    N: int
    gamma: float
    T: float
    seed: int
    initial_soc: int | None = None
    final_soc: int | None = None
    suboptimality: float | None = None
    auc: float | None = None
    npo_total: int | None = None
    dp: int | None = None
    exp: float | None = None
    termination: str = ""


COLUMNS = [f.name for f in fields(ResultRow)]


@dataclass
class BenchRun:
    row: ResultRow
    log: RunEventLog | None


def run_benchmark(
    config: BenchConfig,
    progress: Callable[[ResultRow], None] | None = None,
) -> list[BenchRun]:
    """Run every (algorithm, k, repetition) combination; failures land in the row."""
    out = []
    base = config.params
    for k in config.agent_counts:
        instance = instance_from_scenario(config.grid, config.entries, k)
        for algo in config.algorithms:
            for rep in range(config.repetitions):
                params = replace(base, seed=base.seed + rep)
                row = ResultRow(
                    config.map_name, config.scen_name, algo, k,
                    1 if algo == "sequential" else params.threads,
                    params.neighborhood_size, params.gamma, params.time_budget, params.seed,
                )
                result: RunResult | None = None
                try:
                    result = ENGINES[algo](instance, params)
                except Exception as e:  # one bad run never aborts the batch
                    log.exception("run %s k=%d seed=%d failed", algo, k, params.seed)
                    row.termination = f"error: {e}"
                if result is not None:
                    row.termination = result.termination
                    row.initial_soc = result.initial_soc
                    if result.final_solution is not None:
                        if validate_solution(instance, result.final_solution):
                            row.termination = "infeasible"
                        else:
                            s = summarize(instance, result)
                            row.final_soc = s.final_soc
                            row.suboptimality = s.suboptimality
                            row.auc = s.auc
                            row.npo_total = s.npo_total
                            row.dp = s.dp
                            row.exp = s.exp
                run_log = result.event_log if result is not None else None
                if config.convergence_dir is not None and run_log is not None and run_log.improvements:
                    name = f"{algo}_k{k}_seed{params.seed}.csv"
                    emit_convergence(run_log, Path(config.convergence_dir) / name)
                out.append(BenchRun(row, run_log))
                if progress is not None:
                    progress(row)
    return out


def emit_results(rows: Iterable[ResultRow], path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    rows = list(rows)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path.write_text(json.dumps([asdict(r) for r in rows], indent=2) + "\n")
        elif fmt == "csv":
            with path.open("w", newline="") as f:
                writer = csv.DictWriter(f, fieldnames=COLUMNS)
                writer.writeheader()
                for r in rows:
                    writer.writerow({k: ("" if v is None else v) for k, v in asdict(r).items()})
        else:
            raise ValueError(f"unknown result format {fmt!r}")
    except OSError as e:
        raise OSError(f"cannot write results to {path}: {e}") from e


def read_results(path: str | Path) -> list[ResultRow]:
    """Inverse of :func:`emit_results` for CSV files."""
    types = {f.name: f.type for f in fields(ResultRow)}
    out = []
    with Path(path).open(newline="") as f:
        for rec in csv.DictReader(f):
            vals = {}
            for name, raw in rec.items():
                t = str(types[name])
                if raw == "":
                    vals[name] = None if "None" in t else raw
                elif t.startswith("int"):
                    vals[name] = int(raw)
                elif t.startswith("float"):
                    vals[name] = float(raw)
                else:
                    vals[name] = raw
            out.append(ResultRow(**vals))
    return out


def emit_convergence(log_: RunEventLog, path: str | Path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["time", "soc", "sum_of_delays"])
            for e in log_.improvements:
                writer.writerow([repr(e.time), e.soc, e.sum_of_delays])
    except OSError as e:
        raise OSError(f"cannot write convergence file {path}: {e}") from e


def read_convergence(path: str | Path) -> list[tuple[float, int, int]]:
    with Path(path).open(newline="") as f:
        reader = csv.reader(f)
        next(reader)
        return [(float(t), int(s), int(d)) for t, s, d in reader]


def rows_of(runs: Sequence[BenchRun]) -> list[ResultRow]:
    return [r.row for r in runs]
