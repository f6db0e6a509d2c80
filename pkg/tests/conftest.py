from __future__ import annotations

import os
import random
from pathlib import Path

import pytest

from mapf_lns.io import instance_from_scenario, load_map, load_scen
from mapf_lns.model import GridMap, Instance

DATA = Path(__file__).parent / "data"


def bench_files() -> tuple[Path, Path]:
    """Published random-32-32-10 files if MAPF_BENCH_DIR has them, else the stand-in."""
    root = os.environ.get("MAPF_BENCH_DIR")
    if root:
        m = Path(root) / "random-32-32-10.map"
        s = Path(root) / "random-32-32-10-random-1.scen"
        if m.exists() and s.exists():
            return m, s
    return DATA / "random-32-32-10-standin.map", DATA / "random-32-32-10-standin-1.scen"


@pytest.fixture(scope="session")
def bench_map():
    return load_map(bench_files()[0])


@pytest.fixture(scope="session")
def bench_entries(bench_map):
    return load_scen(bench_files()[1], bench_map)


@pytest.fixture(scope="session")
def bench_instance(bench_map, bench_entries):
    def make(k: int) -> Instance:
        return instance_from_scenario(bench_map, bench_entries, k)

    return make


def random_instance(width: int, height: int, k: int, seed: int, obstacles: float = 0.0) -> Instance:
    rng = random.Random(seed)
    from mapf_lns.io import random_grid

    grid = random_grid(width, height, obstacles, rng) if obstacles else GridMap.open(width, height)
    cells = list(grid.passable_cells)
    starts = rng.sample(cells, k)
    goals = rng.sample(cells, k)
    return Instance.from_pairs(grid, zip(starts, goals))
