"""Per-tick traffic heat-map, abnormal-robot load and dynamic sector weights."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Protocol, TextIO

from .worldmap import Coord, Sector, SectorGraph, WarehouseMap


class RobotLike(Protocol):
    cell: Coord
    sector: int
    delayed: bool
    comm_failed: bool

    @property
    def idle(self) -> bool: ...


@dataclass(frozen=True)
class WeightParams:
    k_h: float = 10.0
    k_l: float = 50.0

    def __post_init__(self):
        if self.k_h < 0 or self.k_l < 0:
            raise ValueError("weighting coefficients must be non-negative")


@dataclass
class TrafficState:
    tick: int
    heat: dict[int, float]
    abnormal: dict[int, float]
    weights: dict[tuple[int, int], float] = field(default_factory=dict)

    def weight(self, a: int, b: int) -> float:
        return self.weights[(a, b)]

    @property
    def max_heat(self) -> float:
        return max(self.heat.values(), default=0.0)

    @property
    def mean_heat(self) -> float:
        return sum(self.heat.values()) / len(self.heat) if self.heat else 0.0


def counts_toward_heat(robot: RobotLike) -> bool:
    # robots parked at a robot station with no task are not traffic
    return not robot.idle


def compute_heat(sector: Sector, robots: Iterable[RobotLike]) -> float:
    if sector.capacity <= 0:
        raise ValueError("sector capacity must be positive")
    n = sum(1 for r in robots if r.sector == sector.id and counts_toward_heat(r))
    return n / sector.capacity


def compute_abnormal(sector: Sector, robots: Iterable[RobotLike]) -> float:
    n = sum(1 for r in robots if r.sector == sector.id and (r.delayed or r.comm_failed))
    return n / sector.capacity


def compute_edge_weight(d_ij: float, h_j: float, l_j: float, params: WeightParams) -> float:
    return d_ij * (1 + params.k_h * h_j + params.k_l * l_j)


def update_traffic(
    wmap: WarehouseMap,
    graph: SectorGraph,
    robots: Iterable[RobotLike],
    params: WeightParams,
    tick: int = 0,
) -> TrafficState:
    """Recompute every h_j, l_j and w_ij from a snapshot of robot states."""
    sectors = wmap.sectors
    busy = {s: 0 for s in sectors}
    bad = {s: 0 for s in sectors}
    for r in robots:
        if counts_toward_heat(r):
            busy[r.sector] += 1
        if r.delayed or r.comm_failed:
            bad[r.sector] += 1
    heat = {s: busy[s] / sectors[s].capacity for s in sectors}
    abnormal = {s: bad[s] / sectors[s].capacity for s in sectors}
    weights = {
        (a, b): compute_edge_weight(e.distance, heat[b], abnormal[b], params)
        for (a, b), e in graph.edges.items()
    }
    return TrafficState(tick, heat, abnormal, weights)


def static_traffic(wmap: WarehouseMap, graph: SectorGraph) -> TrafficState:
    """Zero-traffic state where every weight equals its distance."""
    return update_traffic(wmap, graph, [], WeightParams())


HEAT_COLUMNS = ["tick", "sector_id", "heat", "abnormal"]


def write_heat_rows(out: "csv._writer", state: TrafficState) -> None:
    for s in sorted(state.heat):
        out.writerow([state.tick, s, repr(state.heat[s]), repr(state.abnormal[s])])


def write_heat_csv(fh: TextIO, states: Iterable[TrafficState]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HEAT_COLUMNS)
    for st in states:
        write_heat_rows(w, st)
