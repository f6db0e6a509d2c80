"""Single-agent search: BFS distance fields and space-time A* against reservations."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .model import GridMap, Path

UNREACHABLE = 1 << 30


@dataclass(frozen=True)
class DistanceField:
    goal: int
    dist: tuple[int, ...]

    def __getitem__(self, v: int) -> int:
        return self.dist[v]


def bfs_distances(grid: GridMap, goal: int) -> DistanceField:
    if not grid.passable(goal):
        raise ValueError(f"goal {goal} is not a passable cell")
    dist = [UNREACHABLE] * grid.size
    dist[goal] = 0
    nbrs = grid.neighbors
    queue = deque([goal])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in nbrs[u]:
            if dist[v] == UNREACHABLE:
                dist[v] = du
                queue.append(v)
    return DistanceField(goal, tuple(dist))


@dataclass
class ReservationTable:
    """Space-time occupancy of already-planned paths.

    Keys are packed ints: vertex entries ``t * n + v``, edge entries
    ``(t * n + u) * n + v`` for a move u->v departing at t.
    """

    n_cells: int
    vertex_occupancy: dict[int, int] = field(default_factory=dict)
    edge_traversals: dict[int, int] = field(default_factory=dict)
    goal_parked: dict[int, int] = field(default_factory=dict)
    last_use: dict[int, int] = field(default_factory=dict)
    horizon: int = 0

    def add_path(self, agent: int, path: Path) -> None:
        n = self.n_cells
        vo, et, last = self.vertex_occupancy, self.edge_traversals, self.last_use
        prev = -1
        for t, v in enumerate(path):
            vo[t * n + v] = agent
            if last.get(v, -1) < t:
                last[v] = t
            if prev >= 0 and prev != v:
                et[((t - 1) * n + prev) * n + v] = agent
            prev = v
        end = len(path) - 1
        goal = path[-1]
        cur = self.goal_parked.get(goal)
        if cur is None or end < cur:
            self.goal_parked[goal] = end
        if end > self.horizon:
            self.horizon = end

    def vertex_free(self, v: int, t: int) -> bool:
        park = self.goal_parked.get(v)
        if park is not None and t >= park:
            return False
        return (t * self.n_cells + v) not in self.vertex_occupancy

    def occupant(self, v: int, t: int) -> int | None:
        return self.vertex_occupancy.get(t * self.n_cells + v)

    def edge_free(self, u: int, v: int, t: int) -> bool:
        """True if moving u->v departing at t does not swap with a reserved move v->u."""
        n = self.n_cells
        return ((t * n + v) * n + u) not in self.edge_traversals

    def last_reserved(self, v: int) -> int:
        """Latest timestep at which ``v`` is reserved (infinite if someone parks there)."""
        if v in self.goal_parked:
            return UNREACHABLE
        return self.last_use.get(v, -1)


def build_reservation(
    paths: Iterable[tuple[int, Path]], n_cells: int, horizon_hint: int = 0
) -> ReservationTable:
    """Index (agent_id, path) pairs."""
    table = ReservationTable(n_cells, horizon=horizon_hint)
    for agent, path in paths:
        table.add_path(agent, path)
    return table


class NoPath(Exception):
    """Raised when the constrained search fails.

    ``budget_exhausted`` separates running out of node expansions from an open
    list that emptied (no path exists within the time-expanded search space).
    """

    def __init__(self, budget_exhausted: bool, expansions: int):
        self.budget_exhausted = budget_exhausted
        self.expansions = expansions
        reason = "node budget exhausted" if budget_exhausted else "no path exists"
        super().__init__(f"{reason} after {expansions} expansions")


def default_node_budget(grid: GridMap, start_dist: int) -> int:
    return 4 * (start_dist + 1) * grid.width


@dataclass
class SearchResult:
    path: Path
    expansions: int


def plan_constrained_path(
    grid: GridMap,
    start: int,
    goal: int,
    dist: DistanceField,
    table: ReservationTable,
    node_budget: int | None = None,
) -> SearchResult:
    """Space-time A* from ``start`` to ``goal`` avoiding ``table``.

    The heuristic is ``max(dist[v], goal_ready - t)``: the agent can neither
    beat its distance field nor finish before the last reservation of its goal
    cell has passed. Ties on f go to larger g, then smaller vertex, then moves before waits.
    States past the table horizon are time-collapsed since only parked goals
    remain blocked there. Arrival is accepted only once no reservation uses the
    goal cell at any later time.
    """
    h = dist.dist
    if h[start] >= UNREACHABLE:
        raise NoPath(False, 0)
    if node_budget is None:
        node_budget = default_node_budget(grid, h[start])
    if not table.vertex_free(start, 0):
        raise NoPath(False, 0)

    n = grid.size
    nbrs = grid.neighbors
    vo = table.vertex_occupancy
    et = table.edge_traversals
    parked = table.goal_parked
    cap = table.horizon + 1  # time key saturates here
    goal_ready = table.last_reserved(goal) + 1

    # heap entries: (f, -g, v, wait_flag, tie, t_key, node_id)
    parents: list[int] = [-1]
    verts: list[int] = [start]
    heap = [(max(h[start], goal_ready), 0, start, 0, 0, 0, 0)]
    closed: set[int] = set()
    tie = 0
    expansions = 0
    while heap:
        f, neg_g, v, _, _, tk, node = heapq.heappop(heap)
        key = tk * n + v
        if key in closed:
            continue
        closed.add(key)
        g = -neg_g
        if v == goal and g >= goal_ready:
            out = []
            while node >= 0:
                out.append(verts[node])
                node = parents[node]
            out.reverse()
            return SearchResult(tuple(out), expansions)
        if expansions >= node_budget:
            raise NoPath(True, expansions)
        expansions += 1
        t1 = g + 1
        tk1 = t1 if t1 < cap else cap
        g1 = -t1
        # moves
        for u in nbrs[v]:
            hu = h[u]
            if hu >= UNREACHABLE or (tk1 * n + u) in closed:
                continue
            if (t1 * n + u) in vo:
                continue
            p = parked.get(u)
            if p is not None and t1 >= p:
                continue
            if ((g * n + u) * n + v) in et:
                continue
            tie += 1
            parents.append(node)
            verts.append(u)
            f1 = t1 + hu
            heapq.heappush(
                heap, (f1 if f1 > goal_ready else goal_ready, g1, u, 0, tie, tk1, len(verts) - 1)
            )
        # wait
        if (tk1 * n + v) not in closed and (t1 * n + v) not in vo:
            p = parked.get(v)
            if p is None or t1 < p:
                tie += 1
                parents.append(node)
                verts.append(v)
                f1 = t1 + h[v]
                heapq.heappush(
                    heap, (f1 if f1 > goal_ready else goal_ready, g1, v, 1, tie, tk1, len(verts) - 1)
                )
    raise NoPath(False, expansions)
