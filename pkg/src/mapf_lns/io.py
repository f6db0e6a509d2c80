"""MovingAI benchmark formats: ``.map`` grids and ``.scen`` scenario files."""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .model import GridMap, Instance

PASSABLE = frozenset(".GS")
BLOCKED = frozenset("@OTW")


class ParseError(ValueError):
    """Malformed benchmark input. ``kind`` is a stable error code."""

    def __init__(self, kind: str, message: str, line: int | None = None, entry: int | None = None):
        self.kind = kind
        self.line = line
        self.entry = entry
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message} [{kind}]")


@dataclass(frozen=True)
class ScenarioEntry:
    bucket: int
    map_name: str
    map_dims: tuple[int, int]
    start: tuple[int, int]
    goal: tuple[int, int]
    optimal_hint: float


def _header_value(lines: list[str], idx: int, key: str) -> int:
    if idx >= len(lines):
        raise ParseError("bad-header", f"missing '{key}' line", idx + 1)
    parts = lines[idx].split()
    if len(parts) != 2 or parts[0] != key:
        raise ParseError("bad-header", f"expected '{key} <n>', got {lines[idx]!r}", idx + 1)
    try:
        value = int(parts[1])
    except ValueError:
        raise ParseError("bad-header", f"non-integer {key}: {parts[1]!r}", idx + 1) from None
    if value <= 0:
        raise ParseError("bad-header", f"{key} must be positive", idx + 1)
    return value


def parse_map(text: str) -> GridMap:
    lines = text.splitlines()
    if not lines or lines[0].split()[:1] != ["type"]:
        raise ParseError("bad-header", "first line must be 'type ...'", 1)
    height = _header_value(lines, 1, "height")
    width = _header_value(lines, 2, "width")
    if len(lines) < 4 or lines[3].strip() != "map":
        raise ParseError("bad-header", "expected 'map' line", 4)
    rows = lines[4:]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) < height:
        raise ParseError(
            "truncated-grid", f"expected {height} rows, found {len(rows)}", 5 + len(rows)
        )
    if len(rows) > height:
        raise ParseError("dimension-mismatch", f"more than {height} rows", 5 + height)
    blocked = []
    for r, row in enumerate(rows):
        lineno = 5 + r
        row = row.rstrip("\r")
        if len(row) != width:
            raise ParseError(
                "dimension-mismatch", f"row has {len(row)} cells, expected {width}", lineno
            )
        for ch in row:
            if ch in PASSABLE:
                blocked.append(False)
            elif ch in BLOCKED:
                blocked.append(True)
            else:
                raise ParseError("unknown-glyph", f"unknown map glyph {ch!r}", lineno)
    return GridMap(width, height, tuple(blocked))


def format_map(grid: GridMap) -> str:
    rows = []
    for r in range(grid.height):
        cells = grid.blocked[r * grid.width : (r + 1) * grid.width]
        rows.append("".join("@" if b else "." for b in cells))
    return "type octile\nheight {}\nwidth {}\nmap\n{}\n".format(
        grid.height, grid.width, "\n".join(rows)
    )


def parse_scen(text: str, grid: GridMap | None = None) -> list[ScenarioEntry]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("version"):
        raise ParseError("bad-version", "first line must be 'version ...'", 1)
    entries = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        idx = len(entries)
        parts = raw.split("\t") if "\t" in raw else raw.split()
        if len(parts) != 9:
            raise ParseError("bad-entry", f"expected 9 fields, got {len(parts)}", lineno, idx)
        try:
            bucket = int(parts[0])
            w, h, sx, sy, gx, gy = (int(p) for p in parts[2:8])
            hint = float(parts[8])
        except ValueError:
            raise ParseError("bad-entry", "non-numeric field", lineno, idx) from None
        entry = ScenarioEntry(bucket, parts[1], (w, h), (sx, sy), (gx, gy), hint)
        for label, (x, y) in (("start", entry.start), ("goal", entry.goal)):
            if not (0 <= x < w and 0 <= y < h):
                raise ParseError("out-of-bounds", f"{label} {(x, y)} outside {w}x{h}", lineno, idx)
            if grid is not None:
                if not grid.in_bounds(x, y):
                    raise ParseError("out-of-bounds", f"{label} {(x, y)} outside map", lineno, idx)
                if grid.blocked[grid.index(x, y)]:
                    raise ParseError("blocked-cell", f"{label} {(x, y)} is blocked", lineno, idx)
        entries.append(entry)
    return entries


def _fmt_hint(x: float) -> str:
    return repr(float(x))


def format_scen(entries: Sequence[ScenarioEntry]) -> str:
    out = ["version 1"]
    for e in entries:
        out.append(
            "\t".join(
                str(v)
                for v in (
                    e.bucket, e.map_name, *e.map_dims, *e.start, *e.goal, _fmt_hint(e.optimal_hint)
                )
            )
        )
    return "\n".join(out) + "\n"


def instance_from_scenario(grid: GridMap, entries: Sequence[ScenarioEntry], k: int) -> Instance:
    """Instance from the first ``k`` entries, in file order."""
    if k < 1 or k > len(entries):
        raise ValueError(f"need 1 <= k <= {len(entries)}, got {k}")
    pairs = [(grid.index(*e.start), grid.index(*e.goal)) for e in entries[:k]]
    return Instance.from_pairs(grid, pairs)


def load_map(path: str | Path) -> GridMap:
    return parse_map(Path(path).read_text())


def load_scen(path: str | Path, grid: GridMap | None = None) -> list[ScenarioEntry]:
    return parse_scen(Path(path).read_text(), grid)


def random_grid(width: int, height: int, obstacle_ratio: float, rng: random.Random) -> GridMap:
    """Random obstacle grid whose passable cells form a single 4-connected component.

    Cells outside the largest component are turned into obstacles.
    """
    n = width * height
    blocked = [False] * n
    for v in rng.sample(range(n), round(obstacle_ratio * n)):
        blocked[v] = True
    grid = GridMap(width, height, tuple(blocked))
    seen: set[int] = set()
    best: list[int] = []
    for v in grid.passable_cells:
        if v in seen:
            continue
        comp, stack = [], [v]
        seen.add(v)
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in grid.neighbors[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(comp) > len(best):
            best = comp
    keep = set(best)
    return GridMap(width, height, tuple(v not in keep for v in range(n)))


def random_scenario(
    grid: GridMap, map_name: str, count: int, rng: random.Random
) -> list[ScenarioEntry]:
    """Entries with pairwise-distinct starts and goals; hint is the 4-connected distance."""
    from .planner import bfs_distances

    cells = list(grid.passable_cells)
    starts = rng.sample(cells, count)
    goals = rng.sample(cells, count)
    out = []
    for s, g in zip(starts, goals):
        d = bfs_distances(grid, g).dist[s]
        out.append(
            ScenarioEntry(d // 4, map_name, (grid.width, grid.height), grid.coords(s), grid.coords(g), float(d))
        )
    return out
