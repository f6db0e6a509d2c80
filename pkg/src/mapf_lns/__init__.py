"""Anytime multi-agent path finding with parallel large neighborhood search."""

from .destroy import HeuristicWeights
from .engine import (
    RunParams,
    RunResult,
    destroy_and_repair_task,
    run_deta_lns,
    run_drop_lns,
    run_sequential_lns,
    run_sync_lns,
)
from .io import instance_from_scenario, load_map, load_scen, parse_map, parse_scen
from .metrics import compute_auc, compute_exp, suboptimality_ratio, summarize
from .model import GridMap, Instance, Solution, validate_solution

__all__ = [
    "GridMap",
    "HeuristicWeights",
    "Instance",
    "RunParams",
    "RunResult",
    "Solution",
    "compute_auc",
    "compute_exp",
    "destroy_and_repair_task",
    "instance_from_scenario",
    "load_map",
    "load_scen",
    "parse_map",
    "parse_scen",
    "run_deta_lns",
    "run_drop_lns",
    "run_sequential_lns",
    "run_sync_lns",
    "suboptimality_ratio",
    "summarize",
    "validate_solution",
]
