"""Parametric warehouse layouts built from rectangular station blocks.

Blocks of stations sit between 1-cell wide one-way streets. The perimeter
streets form a clockwise ring and interior streets alternate direction, so
the street network is strongly connected. Each street crossing owns one
sector: the crossing cell plus the street segments leaving it, together
with the stations docked on those segments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .worldmap import DIRECTIONS, Coord, WarehouseMap

# Reference environment: 19 x 23 blocks of 7 x 3 cells inside a 160 x 100 map.
REFERENCE_BLOCKS = {"R": 84, "P": 294, "W": 54}
REFERENCE_PER_BLOCK = {"R": 12, "P": 12, "W": 8}


@dataclass(frozen=True)
class GridLayout:
    block_cols: int
    block_rows: int
    block_w: int
    block_h: int
    offset: Coord = (0, 0)

    @property
    def street_xs(self) -> list[int]:
        return [self.offset[0] + i * (self.block_w + 1) for i in range(self.block_cols + 1)]

    @property
    def street_ys(self) -> list[int]:
        return [self.offset[1] + j * (self.block_h + 1) for j in range(self.block_rows + 1)]

    @property
    def active_size(self) -> tuple[int, int]:
        return (self.block_cols * (self.block_w + 1) + 1, self.block_rows * (self.block_h + 1) + 1)

    @property
    def n_blocks(self) -> int:
        return self.block_cols * self.block_rows

    @property
    def n_sectors(self) -> int:
        return (self.block_cols + 1) * (self.block_rows + 1)

    def slot_cells(self, bi: int, bj: int) -> list[tuple[Coord, Coord]]:
        """(station cell, dock cell) pairs of a block: top row then bottom row."""
        x0 = self.street_xs[bi]
        y_top, y_bot = self.street_ys[bj], self.street_ys[bj + 1]
        top = [((x0 + 1 + k, y_top + 1), (x0 + 1 + k, y_top)) for k in range(self.block_w)]
        bot = [((x0 + 1 + k, y_bot - 1), (x0 + 1 + k, y_bot)) for k in range(self.block_w)]
        return top + bot


def row_directions(n_rows: int) -> list[str]:
    dirs = ["E" if j % 2 == 0 else "W" for j in range(n_rows)]
    dirs[-1] = "W"
    return dirs


def col_directions(n_cols: int) -> list[str]:
    dirs = ["N" if i % 2 == 0 else "S" for i in range(n_cols)]
    dirs[-1] = "S"
    return dirs


def spread(counts: dict[str, int], total: int) -> list[str]:
    """Interleave labels so each label's occurrences are evenly spaced."""
    counts = dict(counts)
    filler = total - sum(counts.values())
    if filler < 0:
        raise ValueError("more items requested than slots")
    if filler:
        counts["#"] = counts.get("#", 0) + filler
    labels = list(counts)
    placed = {k: 0 for k in labels}
    out = []
    for k in range(total):
        best = max(labels, key=lambda t: ((k + 1) * counts[t] / total - placed[t], -labels.index(t)))
        placed[best] += 1
        out.append(best)
    return out


def block_plan(layout: GridLayout, blocks: dict[str, int], per_block: dict[str, int]) -> list[str]:
    """Slot strings per block where whole blocks carry a single station type."""
    w = layout.block_w
    plan = []
    for t in spread(blocks, layout.n_blocks):
        n = per_block.get(t, 0)
        if n > 2 * w:
            raise ValueError(f"block of width {w} cannot hold {n} stations")
        top = n - n // 2
        bot = n // 2
        plan.append(t * top + "#" * (w - top) + t * bot + "#" * (w - bot))
    return plan


def mixed_plan(layout: GridLayout, counts: dict[str, int], rng: np.random.Generator | None = None) -> list[str]:
    """Slot strings where station types are mixed across all slots."""
    w = layout.block_w
    total = layout.n_blocks * 2 * w
    labels = spread(counts, total)
    if rng is not None:
        labels = [labels[i] for i in rng.permutation(total)]
    return ["".join(labels[k * 2 * w:(k + 1) * 2 * w]) for k in range(layout.n_blocks)]


def build_grid_map(
    layout: GridLayout,
    plan: Sequence[str],
    width: int | None = None,
    height: int | None = None,
    alpha: float = 0.5,
) -> WarehouseMap:
    aw, ah = layout.active_size
    width = aw if width is None else width
    height = ah if height is None else height
    if width < aw or height < ah:
        raise ValueError(f"layout needs {aw}x{ah} cells")
    if layout.offset == (0, 0) and (width, height) != (aw, ah):
        layout = GridLayout(layout.block_cols, layout.block_rows, layout.block_w, layout.block_h,
                            ((width - aw) // 2, (height - ah) // 2))
    if len(plan) != layout.n_blocks:
        raise ValueError("plan must have one entry per block")

    grid = [["#"] * width for _ in range(height)]
    sector_of: dict[Coord, int] = {}
    mono: dict[Coord, str] = {}
    xs, ys = layout.street_xs, layout.street_ys
    rdirs, cdirs = row_directions(len(ys)), col_directions(len(xs))
    ncols = len(xs)

    def sid(i: int, j: int) -> int:
        return j * ncols + i

    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            grid[y][x] = "."
            sector_of[(x, y)] = sid(i, j)
    for j, y in enumerate(ys):
        d = rdirs[j]
        for i in range(len(xs) - 1):
            owner = sid(i, j) if d == "E" else sid(i + 1, j)
            for x in range(xs[i] + 1, xs[i + 1]):
                grid[y][x] = "."
                sector_of[(x, y)] = owner
                mono[(x, y)] = d
    for i, x in enumerate(xs):
        d = cdirs[i]
        for j in range(len(ys) - 1):
            owner = sid(i, j) if d == "S" else sid(i, j + 1)
            for y in range(ys[j] + 1, ys[j + 1]):
                grid[y][x] = "."
                sector_of[(x, y)] = owner
                mono[(x, y)] = d

    for b, slots in enumerate(plan):
        bi, bj = b % layout.block_cols, b // layout.block_cols
        cells = layout.slot_cells(bi, bj)
        if len(slots) != len(cells):
            raise ValueError(f"block {b}: expected {len(cells)} slot codes")
        for (cell, dock), code in zip(cells, slots):
            if code == "#":
                continue
            if code not in "RPW":
                raise ValueError(f"bad slot code {code!r}")
            grid[cell[1]][cell[0]] = code
            sector_of[cell] = sector_of[dock]
    return WarehouseMap(width, height, alpha, tuple("".join(r) for r in grid), sector_of, mono)


def reference_layout() -> GridLayout:
    return GridLayout(block_cols=19, block_rows=23, block_w=7, block_h=3)


def reference_map(alpha: float = 0.5) -> WarehouseMap:
    """160 x 100 map with 1008 robot, 3528 pickup and 432 working stations."""
    layout = reference_layout()
    return build_grid_map(layout, block_plan(layout, REFERENCE_BLOCKS, REFERENCE_PER_BLOCK), 160, 100, alpha)


QUARTER_BLOCKS = {"R": 21, "P": 48, "W": 48}


QUARTER_PER_BLOCK = {"R": 12, "P": 14, "W": 14}


def quarter_map(
    alpha: float = 0.5, blocks: dict[str, int] | None = None, per_block: dict[str, int] | None = None
) -> WarehouseMap:
    """Quarter-scale environment with 252 robot stations.

    Working stations are denser than in the reference map so the task
    capacity sits inside the frequency sweep instead of below it.
    """
    layout = GridLayout(block_cols=9, block_rows=13, block_w=7, block_h=3)
    blocks = QUARTER_BLOCKS if blocks is None else blocks
    per_block = QUARTER_PER_BLOCK if per_block is None else per_block
    return build_grid_map(layout, block_plan(layout, blocks, per_block), alpha=alpha)


SMALL_SHAPES = [(2, 2), (1, 3), (3, 1), (1, 4), (4, 1), (2, 3), (3, 2), (1, 5), (5, 1)]


def random_small_map(
    rng: np.random.Generator,
    robot_stations: int = 60,
    pickup_stations: int = 24,
    working_stations: int = 12,
    alpha: float = 0.5,
) -> WarehouseMap:
    """Mixed-station map with 8 to 12 sectors."""
    bc, br = SMALL_SHAPES[int(rng.integers(len(SMALL_SHAPES)))]
    need = robot_stations + pickup_stations + working_stations
    min_w = max(4, math.ceil(need / (2 * bc * br)))
    bw = int(rng.integers(min_w, min_w + 4))
    layout = GridLayout(bc, br, bw, 3)
    counts = {"R": robot_stations, "P": pickup_stations, "W": working_stations}
    return build_grid_map(layout, mixed_plan(layout, counts, rng), alpha=alpha)


def step(c: Coord, d: str) -> Coord:
    dx, dy = DIRECTIONS[d]
    return (c[0] + dx, c[1] + dy)
