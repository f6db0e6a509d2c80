"""Anytime-quality metrics computed from run event logs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .model import Instance, Solution, sum_of_delays

if TYPE_CHECKING:
    from .engine import RunResult


@dataclass(frozen=True)
class ImprovementEvent:
    time: float
    soc: int
    sum_of_delays: int
    task_serial: int
    parent_serial: int | None = None
    depth: int = 0
    solution: Solution | None = field(default=None, repr=False, compare=False)


@dataclass
class RunEventLog:
    improvements: list[ImprovementEvent] = field(default_factory=list)
    npo_total: int = 0
    dp: int = 0
    budget: float = 0.0
    per_thread_npo: list[int] | None = None
    dropped_tasks: int = 0

    def check(self) -> None:
        """Raise ValueError unless the log is well formed."""
        imp = self.improvements
        if not imp:
            raise ValueError("event log is empty")
        for a, b in zip(imp, imp[1:]):
            if not b.soc < a.soc:
                raise ValueError(f"soc not strictly decreasing at serial {b.task_serial}")
            if b.time < a.time:
                raise ValueError(f"timestamps go backwards at serial {b.task_serial}")
        if self.dp > self.npo_total:
            raise ValueError("depth exceeds number of operations")


@dataclass(frozen=True)
class MetricsSummary:
    suboptimality: float
    auc: float
    npo_total: int
    dp: int
    exp: float | None
    final_soc: int
    initial_soc: int


def suboptimality_ratio(instance: Instance, solution: Solution) -> float:
    lb = instance.lower_bound
    if lb <= 0:
        raise ValueError("suboptimality ratio undefined when every start equals its goal")
    return sum_of_delays(instance, solution) / lb


def compute_auc(log: RunEventLog) -> float:
    """Integral of the best-known sum of delays over runtime, held flat until the budget."""
    imp = log.improvements
    if not imp:
        raise ValueError("cannot integrate an empty event log")
    if log.budget < imp[-1].time:
        raise ValueError("budget ends before the last event")
    total = 0.0
    for a, b in zip(imp, imp[1:]):
        total += a.sum_of_delays * (b.time - a.time)
    total += imp[-1].sum_of_delays * (log.budget - imp[-1].time)
    return total


def compute_exp(npo_total: int, dp: int) -> float:
    if npo_total <= 0:
        raise ValueError("exploration ratio undefined without any operations")
    if not 0 <= dp <= npo_total:
        raise ValueError(f"need 0 <= dp <= npo_total, got dp={dp}, npo_total={npo_total}")
    return (npo_total - dp) / npo_total


def depth_tracking(log: RunEventLog) -> int:
    """Length of the accepted-improvement chain ending at the final solution.

    Follows parent serials back through the log; the initial solution has no
    parent and contributes nothing.
    """
    if not log.improvements:
        return 0
    by_serial = {e.task_serial: e for e in log.improvements}
    depth = 0
    event = log.improvements[-1]
    while event.parent_serial is not None:
        depth += 1
        event = by_serial[event.parent_serial]
    return depth


def summarize(instance: Instance, result: RunResult) -> MetricsSummary:
    log = result.event_log
    try:
        exp = compute_exp(log.npo_total, log.dp)
    except ValueError:
        exp = None
    return MetricsSummary(
        suboptimality=suboptimality_ratio(instance, result.final_solution),
        auc=compute_auc(log),
        npo_total=log.npo_total,
        dp=log.dp,
        exp=exp,
        final_soc=result.final_solution.soc,
        initial_soc=result.initial_soc,
    )
