import random

import numpy as np
import pytest
from scipy.sparse import lil_matrix
from scipy.sparse.csgraph import dijkstra

from mapf_lns.model import GridMap, Instance, Solution, validate_solution
from mapf_lns.planner import (
    UNREACHABLE,
    NoPath,
    bfs_distances,
    build_reservation,
    plan_constrained_path,
)

from conftest import random_instance


def pos_at(path, t):
    return path[t] if t < len(path) else path[-1]


def brute_force_cost(grid, start, goal, reserved, horizon):
    """Earliest safe arrival via layered BFS over the (vertex, timestep) product graph."""

    def free(v, t):
        return all(pos_at(p, t) != v for p in reserved)

    def swap_free(u, v, t):
        return not any(
            t + 1 < len(p) and p[t] == v and p[t + 1] == u for p in reserved
        )

    def goal_safe_after(t):
        for p in reserved:
            if p[-1] == goal:
                return False
            if any(p[s] == goal for s in range(t + 1, len(p))):
                return False
        return True

    if not free(start, 0):
        return None
    layer = {start}
    for t in range(horizon + 1):
        if goal in layer and goal_safe_after(t):
            return t
        nxt = set()
        for v in layer:
            for u in (*grid.neighbors[v], v):
                if free(u, t + 1) and (u == v or swap_free(v, u, t)):
                    nxt.add(u)
        layer = nxt
        if not layer:
            return None
    return None


def test_bfs_goal_is_zero():
    grid = GridMap.open(3, 3)
    assert bfs_distances(grid, 4)[4] == 0


def test_bfs_open_grid_corner_to_corner():
    grid = GridMap.open(3, 3)
    assert bfs_distances(grid, 0)[8] == 4


def test_bfs_rejects_blocked_goal():
    grid = GridMap.from_rows([".@"])
    with pytest.raises(ValueError):
        bfs_distances(grid, 1)


def test_bfs_matches_dijkstra(bench_map):
    grid = bench_map
    adj = lil_matrix((grid.size, grid.size))
    for v in grid.passable_cells:
        for u in grid.neighbors[v]:
            adj[v, u] = 1.0
    rng = random.Random(0)
    goals = rng.sample(grid.passable_cells, 5)
    oracle = dijkstra(adj.tocsr(), directed=False, indices=goals)
    for row, g in zip(oracle, goals):
        field = bfs_distances(grid, g)
        for v in range(grid.size):
            if np.isinf(row[v]):
                assert field[v] == UNREACHABLE
            else:
                assert field[v] == int(row[v])


def test_bfs_field_is_consistent(bench_map):
    field = bfs_distances(bench_map, bench_map.passable_cells[17])
    for v in bench_map.passable_cells:
        if field[v] in (0, UNREACHABLE):
            continue
        assert any(field[u] == field[v] - 1 for u in bench_map.neighbors[v])
        assert all(abs(field[u] - field[v]) <= 1 for u in bench_map.neighbors[v])


def test_empty_reservation_is_free_everywhere():
    table = build_reservation([], 9)
    assert all(table.vertex_free(v, t) for v in range(9) for t in range(5))
    assert table.edge_free(0, 1, 0)


def test_reservation_of_one_path():
    table = build_reservation([(0, (0, 1, 2))], 9)
    assert len(table.vertex_occupancy) == 3
    assert len(table.edge_traversals) == 2
    assert table.goal_parked == {2: 2}
    assert not table.vertex_free(2, 2) and not table.vertex_free(2, 50)
    assert table.vertex_free(2, 1)

    waits = build_reservation([(0, (0, 0, 1))], 9)
    assert len(waits.edge_traversals) == 1


def test_reservation_matches_linear_scan():
    rng = random.Random(11)
    grid = GridMap.open(6, 6)
    paths = []
    for _ in range(10):
        p = [rng.randrange(36)]
        for _ in range(rng.randint(0, 8)):
            p.append(rng.choice((*grid.neighbors[p[-1]], p[-1])))
        paths.append(tuple(p))
    table = build_reservation(enumerate(paths), grid.size)
    for v in range(36):
        for t in range(12):
            scan = any(pos_at(p, t) == v for p in paths)
            assert table.vertex_free(v, t) == (not scan), (v, t)
            for u in grid.neighbors[v]:
                swap = any(t + 1 < len(p) and p[t] == u and p[t + 1] == v for p in paths)
                assert table.edge_free(v, u, t) == (not swap)


def test_unconstrained_cost_equals_distance(bench_instance):
    inst = bench_instance(20)
    table = build_reservation([], inst.map.size)
    for a, field in zip(inst.agents, inst.distance_fields):
        res = plan_constrained_path(inst.map, a.start, a.goal, field, table)
        assert len(res.path) - 1 == a.shortest_dist


def test_corridor_with_parked_agent_has_no_path():
    grid = GridMap.from_rows(["....."])
    table = build_reservation([(1, (2,))], grid.size)
    with pytest.raises(NoPath) as err:
        plan_constrained_path(grid, 0, 4, bfs_distances(grid, 4), table)
    assert not err.value.budget_exhausted


def test_budget_exhaustion_is_distinguished():
    grid = GridMap.open(8, 8)
    table = build_reservation([], grid.size)
    with pytest.raises(NoPath) as err:
        plan_constrained_path(grid, 0, 63, bfs_distances(grid, 63), table, node_budget=3)
    assert err.value.budget_exhausted


def test_crossing_path_matches_time_expanded_bfs():
    grid = GridMap.open(8, 8)
    crossing = tuple(grid.index(3, r) for r in range(8))  # sweeps down column 3
    reserved = [crossing]
    table = build_reservation(enumerate(reserved), grid.size)
    for r in range(8):
        start, goal = grid.index(0, r), grid.index(7, 7 - r)
        res = plan_constrained_path(grid, start, goal, bfs_distances(grid, goal), table)
        expected = brute_force_cost(grid, start, goal, reserved, 60)
        assert len(res.path) - 1 == expected


def test_random_reservations_match_time_expanded_bfs():
    rng = random.Random(4)
    grid = GridMap.from_rows(["........", "..@@....", "......@.", ".@......", "....@@..", "........"])
    cells = list(grid.passable_cells)
    checked = 0
    for trial in range(40):
        k = rng.randint(1, 4)
        picks = rng.sample(cells, 2 * k + 2)
        inst = Instance.from_pairs(grid, [(picks[2 * i], picks[2 * i + 1]) for i in range(k)])
        reserved = []
        table = build_reservation([], grid.size)
        ok = True
        for a, f in zip(inst.agents, inst.distance_fields):
            try:
                p = plan_constrained_path(grid, a.start, a.goal, f, table, 10**5).path
            except NoPath:
                ok = False
                break
            reserved.append(p)
            table.add_path(a.id, p)
        if not ok:
            continue
        start, goal = picks[-2], picks[-1]
        if any(p[-1] == start or p[0] == start or p[-1] == goal for p in reserved):
            continue
        expected = brute_force_cost(grid, start, goal, reserved, 80)
        try:
            got = len(plan_constrained_path(grid, start, goal, bfs_distances(grid, goal), table, 10**6).path) - 1
        except NoPath:
            got = None
        assert got == expected, trial
        checked += 1
    assert checked >= 15


def test_returned_paths_validate_with_reservations():
    for seed in range(5):
        inst = random_instance(10, 10, 12, seed=seed, obstacles=0.15)
        table = build_reservation([], inst.map.size)
        paths = []
        for a, f in zip(inst.agents, inst.distance_fields):
            try:
                res = plan_constrained_path(inst.map, a.start, a.goal, f, table, 10**5)
            except NoPath:
                break
            assert len(res.path) - 1 >= a.shortest_dist
            paths.append(res.path)
            table.add_path(a.id, res.path)
        planned = Instance(inst.map, inst.agents[: len(paths)])
        assert len(paths) >= 5
        assert validate_solution(planned, Solution.from_paths(paths)).feasible


def test_search_is_deterministic():
    inst = random_instance(10, 10, 8, seed=2, obstacles=0.1)
    runs = []
    for _ in range(2):
        table = build_reservation([], inst.map.size)
        out = []
        for a, f in zip(inst.agents, inst.distance_fields):
            p = plan_constrained_path(inst.map, a.start, a.goal, f, table, 10**5).path
            table.add_path(a.id, p)
            out.append(p)
        runs.append(out)
    assert runs[0] == runs[1]
