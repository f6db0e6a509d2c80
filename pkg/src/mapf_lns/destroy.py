"""Destroy heuristics, adaptive weights and roulette-wheel selection."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field, replace

from .model import Instance, Solution, agent_delays

HEURISTICS = ("random", "agent", "map")
WEIGHT_FLOOR = 1e-3


@dataclass(frozen=True)
class HeuristicWeights:
    weights: tuple[float, ...] = (1.0, 1.0, 1.0)
    gamma: float = 0.01
    floor: float = WEIGHT_FLOOR

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if len(self.weights) != len(HEURISTICS):
            raise ValueError("one weight per destroy heuristic is required")

    def probabilities(self) -> tuple[float, ...]:
        total = sum(self.weights)
        return tuple(w / total for w in self.weights)


@dataclass(frozen=True)
class Neighborhood:
    heuristic: int
    agents: tuple[int, ...]


@dataclass
class TabuState:
    """Agents already used as agent-based seeds since the last improvement."""

    seeded: set[int] = field(default_factory=set)
    last_soc: int | None = None

    def observe(self, soc: int) -> None:
        if self.last_soc is not None and soc < self.last_soc:
            self.seeded.clear()
        self.last_soc = soc


def select_heuristic(weights: HeuristicWeights, rng: random.Random) -> int:
    ws = weights.weights
    r = rng.random() * sum(ws)
    acc = 0.0
    for h, w in enumerate(ws):
        acc += w
        if r < acc:
            return h
    return len(ws) - 1


def update_weight_success(
    weights: HeuristicWeights, heuristic: int, improvement: float
) -> HeuristicWeights:
    g = weights.gamma
    ws = list(weights.weights)
    ws[heuristic] = max(g * max(improvement, 0) + (1 - g) * ws[heuristic], weights.floor)
    return replace(weights, weights=tuple(ws))


def update_weight_failure(weights: HeuristicWeights, heuristic: int) -> HeuristicWeights:
    ws = list(weights.weights)
    ws[heuristic] = max((1 - weights.gamma) * ws[heuristic], weights.floor)
    return replace(weights, weights=tuple(ws))


def _fill_random(chosen: list[int], k: int, size: int, rng: random.Random) -> list[int]:
    if len(chosen) >= size:
        return chosen[:size]
    taken = set(chosen)
    rest = [i for i in range(k) if i not in taken]
    chosen.extend(rng.sample(rest, size - len(chosen)))
    return chosen


def random_destroy(instance: Instance, n: int, rng: random.Random) -> Neighborhood:
    if n < 1:
        raise ValueError("neighborhood size must be at least 1")
    k = instance.num_agents
    return Neighborhood(0, tuple(rng.sample(range(k), min(n, k))))


def _occupancy(solution: Solution) -> dict[tuple[int, int], int]:
    occ = {}
    for i, p in enumerate(solution.paths):
        for t, v in enumerate(p):
            occ[(v, t)] = i
    return occ


def agent_based_destroy(
    instance: Instance,
    solution: Solution,
    n: int,
    rng: random.Random,
    tabu: TabuState | None = None,
) -> Neighborhood:
    """Seed on a most-delayed agent, then collect agents met by a space-time random walk.

    The walk starts at a random state of the seed's path and only steps to
    states from which the seed could still reach its goal faster than its
    current path does.
    """
    k = instance.num_agents
    size = min(n, k)
    delays = agent_delays(instance, solution)
    if tabu is None:
        tabu = TabuState()
    tabu.observe(solution.soc)
    positive = [i for i in range(k) if delays[i] > 0]
    if not positive:
        return replace(random_destroy(instance, n, rng), heuristic=1)
    candidates = [i for i in positive if i not in tabu.seeded]
    if not candidates:
        tabu.seeded.clear()
        candidates = positive
    top = max(delays[i] for i in candidates)
    seed = rng.choice([i for i in candidates if delays[i] == top])
    tabu.seeded.add(seed)

    grid = instance.map
    h = instance.distance_fields[seed].dist
    path = solution.paths[seed]
    cost = len(path) - 1
    occ = _occupancy(solution)
    ends = {p[-1]: (len(p) - 1, i) for i, p in enumerate(solution.paths)}

    chosen = [seed]
    taken = {seed}
    t = rng.randrange(len(path))
    v = path[t]
    for _ in range(10 * grid.width):
        if len(chosen) >= size:
            break
        options = [u for u in (*grid.neighbors[v], v) if t + 1 + h[u] < cost]
        if not options:
            break
        v = rng.choice(options)
        t += 1
        other = occ.get((v, t))
        if other is None:
            end = ends.get(v)
            if end is not None and t >= end[0]:
                other = end[1]
        if other is not None and other not in taken:
            taken.add(other)
            chosen.append(other)
    return Neighborhood(1, tuple(_fill_random(chosen, k, size, rng)))


def map_based_destroy(
    instance: Instance, solution: Solution, n: int, rng: random.Random
) -> Neighborhood:
    """Collect agents visiting cells around a random intersection (degree >= 3)."""
    grid = instance.map
    k = instance.num_agents
    size = min(n, k)
    hubs = [v for v in grid.passable_cells if len(grid.neighbors[v]) >= 3]
    if not hubs:
        return replace(random_destroy(instance, n, rng), heuristic=2)
    visitors: dict[int, set[int]] = {}
    for i, p in enumerate(solution.paths):
        for v in p:
            visitors.setdefault(v, set()).add(i)

    root = rng.choice(hubs)
    chosen: list[int] = []
    taken: set[int] = set()
    seen = {root}
    frontier = deque([(root, 0)])
    radius = grid.width
    while frontier and len(chosen) < size:
        v, d = frontier.popleft()
        fresh = sorted(visitors.get(v, set()) - taken)
        if len(fresh) > size - len(chosen):
            fresh = rng.sample(fresh, size - len(chosen))
        chosen.extend(fresh)
        taken.update(fresh)
        if d < radius:
            for u in grid.neighbors[v]:
                if u not in seen:
                    seen.add(u)
                    frontier.append((u, d + 1))
    return Neighborhood(2, tuple(_fill_random(chosen, k, size, rng)))


def destroy(
    heuristic: int,
    instance: Instance,
    solution: Solution,
    n: int,
    rng: random.Random,
    tabu: TabuState | None = None,
) -> Neighborhood:
    if heuristic == 0:
        return random_destroy(instance, n, rng)
    if heuristic == 1:
        return agent_based_destroy(instance, solution, n, rng, tabu)
    if heuristic == 2:
        return map_based_destroy(instance, solution, n, rng)
    raise ValueError(f"unknown destroy heuristic {heuristic}")
