"""Prioritized Planning: the repair operator and initial-solution construction."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .model import Instance, Path, Solution
from .planner import NoPath, build_reservation, default_node_budget, plan_constrained_path


@dataclass
class RepairOutcome:
    success: bool
    new_paths: dict[int, Path] = field(default_factory=dict)
    expansions_used: int = 0
    failed_agent: int | None = None
    budget_exhausted: bool = False


class NoInitialSolution(RuntimeError):
    pass


def random_priority_order(agents: Sequence[int], rng: random.Random) -> list[int]:
    order = list(agents)
    rng.shuffle(order)
    return order


def pp_repair(
    instance: Instance,
    fixed_paths: Mapping[int, Path],
    order: Sequence[int],
    node_budget: int | None = None,
) -> RepairOutcome:
    """Plan ``order`` one agent at a time against ``fixed_paths`` and earlier agents.

    ``node_budget`` is split evenly across the agents; ``None`` gives each agent
    the planner's default. Failure of any agent fails the whole repair.
    """
    grid = instance.map
    table = build_reservation(fixed_paths.items(), grid.size)
    share = None if node_budget is None else max(1, node_budget // max(1, len(order)))
    dists = instance.distance_fields
    out = RepairOutcome(True)
    for i in order:
        a = instance.agents[i]
        budget = share if share is not None else default_node_budget(grid, a.shortest_dist)
        try:
            res = plan_constrained_path(grid, a.start, a.goal, dists[i], table, budget)
        except NoPath as e:
            out.success = False
            out.new_paths = {}
            out.failed_agent = i
            out.budget_exhausted = e.budget_exhausted
            out.expansions_used += e.expansions
            return out
        out.expansions_used += res.expansions
        out.new_paths[i] = res.path
        table.add_path(i, res.path)
    return out


def initial_solution(
    instance: Instance,
    rng: random.Random,
    restart_limit: int = 50,
    node_budget: int | None = None,
) -> Solution:
    """PP over all agents with a fresh random order per attempt."""
    agents = range(instance.num_agents)
    for _ in range(restart_limit):
        order = random_priority_order(agents, rng)
        outcome = pp_repair(instance, {}, order, node_budget)
        if outcome.success:
            return Solution.from_paths(outcome.new_paths[i] for i in agents)
    raise NoInitialSolution(f"prioritized planning failed {restart_limit} times")
