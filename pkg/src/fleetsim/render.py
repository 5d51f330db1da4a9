"""Gray-scale heat-map rasters written as binary PGM.

Walls are white (255). Every sector cell gets ``230 * (1 - min(h, 1))``,
so an empty sector is light gray and a sector at or above capacity is black.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .traffic import TrafficState
from .worldmap import WarehouseMap

WALL_LEVEL = 255
COLD_LEVEL = 230


def heat_level(h: float) -> int:
    return int(round(COLD_LEVEL * (1.0 - min(max(h, 0.0), 1.0))))


def heat_raster(wmap: WarehouseMap, state: TrafficState, scale: int = 1) -> np.ndarray:
    img = np.full((wmap.height, wmap.width), WALL_LEVEL, dtype=np.uint8)
    for (x, y), s in wmap.sector_of.items():
        img[y, x] = heat_level(state.heat.get(s, 0.0))
    if scale > 1:
        img = np.kron(img, np.ones((scale, scale), dtype=np.uint8))
    return img


def write_pgm(path, img: np.ndarray) -> None:
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4], dtype=np.uint8, count=w * h).reshape(h, w)


def render_snapshot(wmap: WarehouseMap, state: TrafficState, path, scale: int = 1) -> None:
    write_pgm(path, heat_raster(wmap, state, scale))
