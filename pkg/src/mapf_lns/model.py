"""Core MAPF types: grid graph, agents, instances, solutions and the validator.

Vertices are integer cell indices ``row * width + col``. A path is a tuple of
vertices indexed by timestep; after its last state the agent stays parked at
its goal forever.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

Path = tuple[int, ...]


@dataclass(frozen=True)
class GridMap:
    """4-connected grid; ``blocked`` is row-major, one flag per cell."""

    width: int
    height: int
    blocked: tuple[bool, ...]

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"grid dimensions must be positive, got {self.width}x{self.height}")
        if len(self.blocked) != self.width * self.height:
            raise ValueError(
                f"expected {self.width * self.height} cells, got {len(self.blocked)}"
            )

    @classmethod
    def from_rows(cls, rows: Sequence[str], blocked_glyphs: str = "@OTW") -> GridMap:
        """Build from equal-length strings; handy for small hand-drawn maps."""
        height = len(rows)
        width = len(rows[0]) if rows else 0
        if any(len(r) != width for r in rows):
            raise ValueError("rows must have equal length")
        return cls(width, height, tuple(ch in blocked_glyphs for r in rows for ch in r))

    @classmethod
    def open(cls, width: int, height: int) -> GridMap:
        return cls(width, height, (False,) * (width * height))

    @property
    def size(self) -> int:
        return self.width * self.height

    def index(self, col: int, row: int) -> int:
        return row * self.width + col

    def coords(self, v: int) -> tuple[int, int]:
        """(col, row) of vertex ``v``."""
        return v % self.width, v // self.width

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def passable(self, v: int) -> bool:
        return 0 <= v < self.size and not self.blocked[v]

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Passable 4-neighbors of every cell (empty for blocked cells)."""
        w, h, blocked = self.width, self.height, self.blocked
        out = []
        for v in range(w * h):
            if blocked[v]:
                out.append(())
                continue
            c, r = v % w, v // w
            nbrs = []
            # fixed order: up, left, right, down (ascending vertex index)
            if r > 0 and not blocked[v - w]:
                nbrs.append(v - w)
            if c > 0 and not blocked[v - 1]:
                nbrs.append(v - 1)
            if c < w - 1 and not blocked[v + 1]:
                nbrs.append(v + 1)
            if r < h - 1 and not blocked[v + w]:
                nbrs.append(v + w)
            out.append(tuple(nbrs))
        return tuple(out)

    @cached_property
    def passable_cells(self) -> tuple[int, ...]:
        return tuple(v for v in range(self.size) if not self.blocked[v])

    @cached_property
    def edge_count(self) -> int:
        return sum(len(n) for n in self.neighbors) // 2

    def degree(self, v: int) -> int:
        return len(self.neighbors[v])


@dataclass(frozen=True)
class Agent:
    id: int
    start: int
    goal: int
    shortest_dist: int


@dataclass(frozen=True)
class Instance:
    map: GridMap
    agents: tuple[Agent, ...]

    def __post_init__(self) -> None:
        if not self.agents:
            raise ValueError("an instance needs at least one agent")
        starts = [a.start for a in self.agents]
        goals = [a.goal for a in self.agents]
        if len(set(starts)) != len(starts):
            raise ValueError("agent starts must be pairwise distinct")
        if len(set(goals)) != len(goals):
            raise ValueError("agent goals must be pairwise distinct")
        for i, a in enumerate(self.agents):
            if a.id != i:
                raise ValueError(f"agent at position {i} has id {a.id}")
            if not (self.map.passable(a.start) and self.map.passable(a.goal)):
                raise ValueError(f"agent {i} has a blocked or out-of-range start/goal")

    @classmethod
    def from_pairs(cls, grid: GridMap, pairs: Iterable[tuple[int, int]]) -> Instance:
        """Create an instance from (start, goal) vertex pairs, computing shortest distances."""
        from .planner import UNREACHABLE, bfs_distances

        pairs = list(pairs)
        fields_ = [bfs_distances(grid, g) for _, g in pairs]
        agents = []
        for i, ((s, g), df) in enumerate(zip(pairs, fields_)):
            if not grid.passable(s) or not grid.passable(g):
                raise ValueError(f"agent {i} has a blocked or out-of-range start/goal")
            d = df.dist[s]
            if d >= UNREACHABLE:
                raise ValueError(f"agent {i}: goal {g} unreachable from start {s}")
            agents.append(Agent(i, s, g, d))
        inst = cls(grid, tuple(agents))
        inst.__dict__["distance_fields"] = tuple(fields_)
        return inst

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    @cached_property
    def distance_fields(self):
        from .planner import bfs_distances

        return tuple(bfs_distances(self.map, a.goal) for a in self.agents)

    @cached_property
    def lower_bound(self) -> int:
        return sum(a.shortest_dist for a in self.agents)


def path_cost(path: Path) -> int:
    return len(path) - 1


@dataclass(frozen=True)
class Solution:
    """One path per agent plus cached sum of costs.

    ``depth`` counts accepted destroy/repair operations on the lineage from the
    initial solution; ``serial`` is the task that produced it (-1 for initial).
    """

    paths: tuple[Path, ...]
    soc: int
    depth: int = 0
    serial: int = -1
    parent: int | None = None

    @classmethod
    def from_paths(cls, paths: Iterable[Sequence[int]], **meta) -> Solution:
        paths = tuple(tuple(p) for p in paths)
        return cls(paths, sum(len(p) - 1 for p in paths), **meta)

    def splice(self, new_paths: Mapping[int, Path], *, serial: int) -> Solution:
        """Replace the given agents' paths; result is one step deeper on this lineage."""
        paths = list(self.paths)
        delta = 0
        for i, p in new_paths.items():
            delta += len(p) - len(paths[i])
            paths[i] = p
        return Solution(tuple(paths), self.soc + delta, self.depth + 1, serial, self.serial)

    def cost_of(self, agents: Iterable[int]) -> int:
        return sum(len(self.paths[i]) - 1 for i in agents)


def soc(solution: Solution) -> int:
    """Sum of costs recomputed from the paths."""
    return sum(len(p) - 1 for p in solution.paths)


def agent_delays(instance: Instance, solution: Solution) -> list[int]:
    return [len(p) - 1 - a.shortest_dist for p, a in zip(solution.paths, instance.agents)]


def sum_of_delays(instance: Instance, solution: Solution) -> int:
    delays = agent_delays(instance, solution)
    bad = [i for i, d in enumerate(delays) if d < 0]
    if bad:
        raise ValueError(f"paths shorter than shortest distance for agents {bad}")
    return sum(delays)


@dataclass(frozen=True)
class Conflict:
    kind: str  # "vertex" or "edge"
    agents: tuple[int, int]
    timestep: int
    location: int | tuple[int, int]


@dataclass(frozen=True)
class PathViolation:
    agent: int
    reason: str
    timestep: int | None = None


@dataclass
class ConflictReport:
    conflicts: list[Conflict] = field(default_factory=list)
    violations: list[PathViolation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.conflicts and not self.violations

    def __bool__(self) -> bool:
        # truthy when something is wrong, so `if report:` reads as "has problems"
        return not self.feasible


def check_path(grid: GridMap, agent: Agent, path: Sequence[int]) -> list[PathViolation]:
    out = []
    if not path:
        return [PathViolation(agent.id, "empty path")]
    if path[0] != agent.start:
        out.append(PathViolation(agent.id, "does not begin at start", 0))
    if path[-1] != agent.goal:
        out.append(PathViolation(agent.id, "does not end at goal", len(path) - 1))
    for t, v in enumerate(path):
        if not grid.passable(v):
            out.append(PathViolation(agent.id, "blocked or out-of-range cell", t))
        elif t > 0 and v != path[t - 1] and v not in grid.neighbors[path[t - 1]]:
            out.append(PathViolation(agent.id, "non-adjacent move", t))
    return out


def validate_solution(instance: Instance, solution: Solution) -> ConflictReport:
    """Find structural path problems plus vertex and swap conflicts.

    Agents are parked at their last state after their path ends. Edge
    conflicts are reported at the departure timestep.
    """
    report = ConflictReport()
    k = instance.num_agents
    paths = solution.paths
    if len(paths) != k:
        report.violations.append(
            PathViolation(-1, f"expected {k} paths, got {len(paths)}")
        )
        return report
    for agent, path in zip(instance.agents, paths):
        report.violations.extend(check_path(instance.map, agent, path))
    if any(not p for p in paths):
        return report
    if sum(len(p) - 1 for p in paths) != solution.soc:
        report.violations.append(PathViolation(-1, "cached soc does not match paths"))

    horizon = max(len(p) for p in paths)
    for t in range(horizon):
        occupied: dict[int, list[int]] = {}
        for i, p in enumerate(paths):
            v = p[t] if t < len(p) else p[-1]
            here = occupied.setdefault(v, [])
            for j in here:
                report.conflicts.append(Conflict("vertex", (j, i), t, v))
            here.append(i)
        if t + 1 >= horizon:
            break
        moves: dict[tuple[int, int], list[int]] = {}
        for i, p in enumerate(paths):
            if t + 1 < len(p) and p[t] != p[t + 1]:
                moves.setdefault((p[t], p[t + 1]), []).append(i)
        for (u, v), movers in moves.items():
            for i in movers:
                for j in moves.get((v, u), ()):
                    if i < j:
                        report.conflicts.append(Conflict("edge", (i, j), t, (u, v)))
    return report
