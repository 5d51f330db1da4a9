"""Warehouse grid maps: parsing, serialization, validation and graph building.

A map is a 4-connected grid of unit cells (1 cell = 1 m x 1 m). Every
non-wall cell is assigned to a sector in the map document itself; this
module only checks the assignment, it never computes one.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row, row 0
at the top. ``N`` therefore means ``y - 1``.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

Coord = tuple[int, int]

DIRECTIONS: dict[str, Coord] = {"N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0)}
OPPOSITE = {"N": "S", "S": "N", "E": "W", "W": "E"}
_DIR_OF = {v: k for k, v in DIRECTIONS.items()}


class MapError(ValueError):
    """Structural problem with a map (bad annotations, unreachable centers...)."""


class MapParseError(MapError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class CellKind(enum.Enum):
    ROAD = "."
    WALL = "#"
    ROBOT_STATION = "R"
    PICKUP_STATION = "P"
    WORKING_STATION = "W"

    @property
    def is_station(self) -> bool:
        return self in (CellKind.ROBOT_STATION, CellKind.PICKUP_STATION, CellKind.WORKING_STATION)


_KIND_OF_CHAR = {k.value: k for k in CellKind}


class Cell(NamedTuple):
    coordinate: Coord
    kind: CellKind


class DirectionClass(enum.Enum):
    MONO = "mono"
    BI = "bi"


def sector_token(sector_id: int) -> str:
    return np.base_repr(sector_id, 36).lower()


@dataclass(frozen=True)
class Sector:
    id: int
    cells: frozenset[Coord]
    road_cells: frozenset[Coord]
    entryways: tuple[tuple[int, Coord], ...]  # (from-sector, boundary cell in this sector)
    exitways: tuple[tuple[int, Coord], ...]  # (to-sector, boundary cell in this sector)
    capacity: int


@dataclass(frozen=True)
class SectorEdge:
    source: int
    target: int
    exit_cell: Coord  # last cell inside ``source``
    entry_cell: Coord  # first cell inside ``target``
    distance: float  # d_ij, meters between sector centers


@dataclass
class SectorGraph:
    vertices: tuple[int, ...]
    edges: dict[tuple[int, int], SectorEdge]
    centers: dict[int, Coord]

    def successors(self, sector: int) -> list[int]:
        return self._succ.get(sector, [])

    @cached_property
    def _succ(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for a, b in sorted(self.edges):
            out.setdefault(a, []).append(b)
        return out

    @cached_property
    def static_distance(self) -> dict[int, dict[int, float]]:
        """All-pairs shortest path lengths under the static ``d`` weights."""
        index = {s: i for i, s in enumerate(self.vertices)}
        n = len(self.vertices)
        if not self.edges:
            return {s: {s: 0.0} for s in self.vertices}
        rows = [index[a] for a, _ in self.edges]
        cols = [index[b] for _, b in self.edges]
        data = [e.distance for e in self.edges.values()]
        mat = csr_matrix((data, (rows, cols)), shape=(n, n))
        dist = dijkstra(mat, directed=True)
        out: dict[int, dict[int, float]] = {}
        for s, i in index.items():
            row = dist[i]
            out[s] = {t: float(row[j]) for t, j in index.items() if np.isfinite(row[j])}
        return out


@dataclass
class RoadGraph:
    """Directed road topology of one sector."""

    sector: int
    vertices: frozenset[Coord]
    succ: dict[Coord, tuple[Coord, ...]]
    pred: dict[Coord, tuple[Coord, ...]]
    stations: frozenset[Coord]

    def edges(self) -> list[tuple[Coord, Coord]]:
        return [(a, b) for a in sorted(self.succ) for b in self.succ[a]]

    def direction_class(self, a: Coord, b: Coord) -> DirectionClass:
        return DirectionClass.BI if a in self.succ.get(b, ()) else DirectionClass.MONO

    def length(self, a: Coord, b: Coord) -> float:
        return 1.0

    def distances_to(self, goal: Coord) -> dict[Coord, int]:
        """Static shortest distances to ``goal`` without passing through stations."""
        cache = self._dist_cache
        if goal in cache:
            return cache[goal]
        dist = {goal: 0}
        frontier = deque([goal])
        while frontier:
            c = frontier.popleft()
            if c != goal and c in self.stations:
                continue
            d = dist[c] + 1
            for p in self.pred[c]:
                if p not in dist:
                    dist[p] = d
                    frontier.append(p)
        cache[goal] = dist
        return dist

    @cached_property
    def _dist_cache(self) -> dict[Coord, dict[Coord, int]]:
        return {}

    @cached_property
    def diameter(self) -> int:
        """Largest finite directed station-free distance between two vertices."""
        best = 0
        for v in sorted(self.vertices):
            d = self.distances_to(v)
            best = max(best, max(d.values()))
        return best


@dataclass
class CriterionResult:
    name: str
    passed: bool
    witnesses: list[str] = field(default_factory=list)


@dataclass
class ValidationReport:
    criteria: list[CriterionResult]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.criteria)

    def __getitem__(self, name: str) -> CriterionResult:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for c in self.criteria:
            status = "PASS" if c.passed else "FAIL"
            line = f"{c.name}: {status}"
            if c.witnesses:
                line += " (" + "; ".join(c.witnesses[:10]) + ")"
            out.append(line)
        return out


@dataclass
class WarehouseMap:
    width: int
    height: int
    alpha: float
    rows: tuple[str, ...]
    sector_of: dict[Coord, int]
    mono: dict[Coord, str] = field(default_factory=dict)

    # ------------------------------------------------------------------ cells
    def kind(self, c: Coord) -> CellKind:
        x, y = c
        return _KIND_OF_CHAR[self.rows[y][x]]

    def in_bounds(self, c: Coord) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def passable(self, c: Coord) -> bool:
        return self.in_bounds(c) and self.rows[c[1]][c[0]] != "#"

    def is_station(self, c: Coord) -> bool:
        return self.rows[c[1]][c[0]] in "RPW"

    def cells(self) -> Iterator[Cell]:
        for y, row in enumerate(self.rows):
            for x, ch in enumerate(row):
                yield Cell((x, y), _KIND_OF_CHAR[ch])

    def cells_of_kind(self, kind: CellKind) -> list[Coord]:
        ch = kind.value
        return [(x, y) for y, row in enumerate(self.rows) for x, c in enumerate(row) if c == ch]

    @cached_property
    def robot_stations(self) -> list[Coord]:
        return self.cells_of_kind(CellKind.ROBOT_STATION)

    @cached_property
    def pickup_stations(self) -> list[Coord]:
        return self.cells_of_kind(CellKind.PICKUP_STATION)

    @cached_property
    def working_stations(self) -> list[Coord]:
        return self.cells_of_kind(CellKind.WORKING_STATION)

    def station_counts(self) -> dict[CellKind, int]:
        return {
            CellKind.ROBOT_STATION: len(self.robot_stations),
            CellKind.PICKUP_STATION: len(self.pickup_stations),
            CellKind.WORKING_STATION: len(self.working_stations),
        }

    def neighbors4(self, c: Coord) -> Iterator[Coord]:
        x, y = c
        for dx, dy in DIRECTIONS.values():
            n = (x + dx, y + dy)
            if self.passable(n):
                yield n

    def road_neighbor_count(self, c: Coord) -> int:
        return sum(1 for n in self.neighbors4(c) if self.rows[n[1]][n[0]] == ".")

    def is_intersection(self, c: Coord) -> bool:
        return self.kind(c) is CellKind.ROAD and self.road_neighbor_count(c) >= 3

    # ------------------------------------------------------------ road network
    def _edge_allowed(self, a: Coord, b: Coord) -> bool:
        ka, kb = self.rows[a[1]][a[0]], self.rows[b[1]][b[0]]
        if ka != "." or kb != ".":
            if ka != "." and kb != ".":
                return False
            return self.sector_of[a] == self.sector_of[b]
        d = _DIR_OF[(b[0] - a[0], b[1] - a[1])]
        back = OPPOSITE[d]
        return self.mono.get(a) != back and self.mono.get(b) != back

    @cached_property
    def successors(self) -> dict[Coord, tuple[Coord, ...]]:
        """Directed passability over the whole map (mono annotations applied)."""
        succ: dict[Coord, tuple[Coord, ...]] = {}
        for y, row in enumerate(self.rows):
            for x, ch in enumerate(row):
                if ch == "#":
                    continue
                c = (x, y)
                succ[c] = tuple(n for n in self.neighbors4(c) if self._edge_allowed(c, n))
        for a, outs in succ.items():
            if self.rows[a[1]][a[0]] != ".":
                continue
            for b in self.neighbors4(a):
                if self.rows[b[1]][b[0]] == "." and b not in outs and a not in succ[b]:
                    raise MapError(f"direction annotation conflict between {a} and {b}")
        return succ

    @cached_property
    def predecessors(self) -> dict[Coord, tuple[Coord, ...]]:
        pred: dict[Coord, list[Coord]] = {c: [] for c in self.successors}
        for a, outs in self.successors.items():
            for b in outs:
                pred[b].append(a)
        return {c: tuple(v) for c, v in pred.items()}

    @cached_property
    def crossing_edges(self) -> dict[tuple[int, int], list[tuple[Coord, Coord]]]:
        """Directed edges whose endpoints lie in different sectors, by sector pair."""
        out: dict[tuple[int, int], list[tuple[Coord, Coord]]] = {}
        for a in sorted(self.successors):
            sa = self.sector_of[a]
            for b in self.successors[a]:
                sb = self.sector_of[b]
                if sa != sb:
                    out.setdefault((sa, sb), []).append((a, b))
        return out

    @cached_property
    def sector_ids(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.sector_of.values())))

    @cached_property
    def sectors(self) -> dict[int, Sector]:
        cells: dict[int, set[Coord]] = {s: set() for s in self.sector_ids}
        for c, s in self.sector_of.items():
            cells[s].add(c)
        entries: dict[int, list] = {s: [] for s in self.sector_ids}
        exits: dict[int, list] = {s: [] for s in self.sector_ids}
        for (sa, sb), edges in sorted(self.crossing_edges.items()):
            for a, b in edges:
                entries[sb].append((sa, b))
                exits[sa].append((sb, a))
        out = {}
        for s in self.sector_ids:
            roads = frozenset(c for c in cells[s] if self.rows[c[1]][c[0]] == ".")
            cap = max(1, math.ceil(self.alpha * len(roads) - 1e-9))
            out[s] = Sector(s, frozenset(cells[s]), roads, tuple(entries[s]), tuple(exits[s]), cap)
        return out

    @cached_property
    def transit_index(self) -> "TransitGraph":
        return TransitGraph(self)

    # ----------------------------------------------------------------- compare
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WarehouseMap):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.alpha == other.alpha
            and self.rows == other.rows
            and self.sector_of == other.sector_of
            and self.mono == other.mono
        )

    __hash__ = None  # type: ignore[assignment]


class TransitGraph:
    """Whole-map sparse graph where stations are split into a sink and a source node.

    A station can then only start or end a path, which is the static road
    distance used for task allocation and C2 style checks.
    """

    def __init__(self, wmap: WarehouseMap):
        self.map = wmap
        cells = sorted(wmap.successors)
        self.cells = cells
        self.index = {c: i for i, c in enumerate(cells)}
        n = len(cells)
        stations = [c for c in cells if wmap.is_station(c)]
        self.source_index = {c: n + k for k, c in enumerate(stations)}  # station "out" node
        rows, cols = [], []
        for a in cells:
            ia = self.source_index.get(a, self.index[a])
            for b in wmap.successors[a]:
                rows.append(ia)
                cols.append(self.index[b])
        size = n + len(stations)
        self.size = size
        data = np.ones(len(rows))
        self.forward = csr_matrix((data, (rows, cols)), shape=(size, size))
        self.backward = self.forward.T.tocsr()
        self._to_cache: dict[Coord, np.ndarray] = {}

    def distances_to(self, goal: Coord) -> np.ndarray:
        """Distance array from every node to ``goal`` (inf if unreachable)."""
        cached = self._to_cache.get(goal)
        if cached is None:
            cached = dijkstra(self.backward, directed=True, indices=self.index[goal])
            if len(self._to_cache) > 4096:
                self._to_cache.clear()
            self._to_cache[goal] = cached
        return cached

    def distance(self, start: Coord, goal: Coord) -> float:
        if start == goal:
            return 0.0
        d = self.distances_to(goal)
        return float(d[self.source_index.get(start, self.index[start])])

    def start_node(self, c: Coord) -> int:
        return self.source_index.get(c, self.index[c])


# ---------------------------------------------------------------------------
# parsing / serialization
# ---------------------------------------------------------------------------


def parse_map(text: str) -> WarehouseMap:
    lines = text.splitlines()
    pos = 0

    def header(key: str, conv):
        nonlocal pos
        if pos >= len(lines):
            raise MapParseError(f"missing '{key}' header", pos + 1)
        parts = lines[pos].split()
        if len(parts) != 2 or parts[0] != key:
            raise MapParseError(f"expected '{key} <value>'", pos + 1)
        try:
            value = conv(parts[1])
        except ValueError:
            raise MapParseError(f"bad value for '{key}': {parts[1]!r}", pos + 1, len(key) + 2) from None
        pos += 1
        return value

    width = header("width", int)
    height = header("height", int)
    alpha = header("alpha", float)
    if width <= 0 or height <= 0:
        raise MapParseError("width and height must be positive", 1)
    if not alpha > 0:
        raise MapParseError("alpha must be positive", 3)

    rows = []
    for y in range(height):
        if pos >= len(lines):
            raise MapParseError(f"truncated grid: expected {height} rows, got {y}", pos + 1)
        row = lines[pos].rstrip("\n")
        if len(row) != width:
            raise MapParseError(f"grid row {y} has {len(row)} cells, expected {width}", pos + 1)
        for x, ch in enumerate(row):
            if ch not in _KIND_OF_CHAR:
                raise MapParseError(f"unknown cell code {ch!r} at ({x}, {y})", pos + 1, x + 1)
        rows.append(row)
        pos += 1

    if pos >= len(lines) or lines[pos].strip() != "sectors":
        raise MapParseError("expected 'sectors' block", pos + 1)
    pos += 1
    sector_of: dict[Coord, int] = {}
    for y in range(height):
        if pos >= len(lines):
            raise MapParseError(f"truncated sectors block: expected {height} rows, got {y}", pos + 1)
        tokens = lines[pos].split()
        if len(tokens) != width:
            raise MapParseError(f"sector row {y} has {len(tokens)} entries, expected {width}", pos + 1)
        for x, tok in enumerate(tokens):
            wall = rows[y][x] == "#"
            if tok == "-":
                if not wall:
                    raise MapParseError(f"cell ({x}, {y}) is assigned to no sector", pos + 1)
                continue
            if wall:
                raise MapParseError(f"wall cell ({x}, {y}) carries sector id {tok!r}", pos + 1)
            if "," in tok:
                raise MapParseError(f"cell ({x}, {y}) is assigned to multiple sectors", pos + 1)
            try:
                sector_of[(x, y)] = int(tok, 36)
            except ValueError:
                raise MapParseError(f"bad sector id {tok!r} at ({x}, {y})", pos + 1) from None
        pos += 1

    mono: dict[Coord, str] = {}
    if pos < len(lines) and lines[pos].strip() == "mono":
        pos += 1
        while pos < len(lines) and lines[pos].strip():
            parts = lines[pos].split()
            if len(parts) != 3 or parts[2] not in DIRECTIONS:
                raise MapParseError("expected 'x y dir' with dir in N/E/S/W", pos + 1)
            try:
                c = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise MapParseError("bad mono coordinate", pos + 1) from None
            if not (0 <= c[0] < width and 0 <= c[1] < height) or rows[c[1]][c[0]] == "#":
                raise MapParseError(f"mono annotation on non-passable cell {c}", pos + 1)
            if c in mono:
                raise MapParseError(f"duplicate mono annotation for {c}", pos + 1)
            mono[c] = parts[2]
            pos += 1
    while pos < len(lines):
        if lines[pos].strip():
            raise MapParseError(f"unexpected content {lines[pos][:20]!r}", pos + 1)
        pos += 1
    return WarehouseMap(width, height, alpha, tuple(rows), sector_of, mono)


def load_map(path) -> WarehouseMap:
    with open(path, encoding="utf-8") as fh:
        return parse_map(fh.read())


def serialize_map(wmap: WarehouseMap) -> str:
    out = [f"width {wmap.width}", f"height {wmap.height}", f"alpha {wmap.alpha!r}"]
    out.extend(wmap.rows)
    out.append("sectors")
    for y in range(wmap.height):
        toks = []
        for x in range(wmap.width):
            s = wmap.sector_of.get((x, y))
            toks.append("-" if s is None else sector_token(s))
        out.append(" ".join(toks))
    if wmap.mono:
        out.append("mono")
        for (x, y) in sorted(wmap.mono, key=lambda c: (c[1], c[0])):
            out.append(f"{x} {y} {wmap.mono[(x, y)]}")
    return "\n".join(out) + "\n"


def save_map(wmap: WarehouseMap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_map(wmap))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _station_path_blocker(wmap: WarehouseMap, s1: Coord, s2: Coord) -> Coord | None:
    """First intermediate station on a shortest path s1 -> s2 through anything."""
    prev = {s1: None}
    frontier = deque([s1])
    while frontier:
        c = frontier.popleft()
        if c == s2:
            break
        for n in wmap.successors[c]:
            if n not in prev:
                prev[n] = c
                frontier.append(n)
    if s2 not in prev:
        return None
    path = []
    c = prev[s2]
    while c is not None and c != s1:
        path.append(c)
        c = prev[c]
    for c in reversed(path):
        if wmap.is_station(c):
            return c
    return None


def validate_well_formed(wmap: WarehouseMap, robot_count: int) -> ValidationReport:
    """Check C1 (enough robot stations) and C2 (station-free paths between stations)."""
    n_rs = len(wmap.robot_stations)
    c1 = CriterionResult("C1", n_rs >= robot_count)
    if not c1.passed:
        c1.witnesses.append(f"{n_rs} < {robot_count}")

    # Road-only condensation; a station pair is fine when some road cell the
    # first exits to reaches some road cell the second is entered from.
    roads = [c for c in wmap.successors if wmap.kind(c) is CellKind.ROAD]
    idx = {c: i for i, c in enumerate(roads)}
    rows, cols = [], []
    for a in roads:
        for b in wmap.successors[a]:
            if b in idx:
                rows.append(idx[a])
                cols.append(idx[b])
    n = len(roads)
    c2 = CriterionResult("C2", True)
    stations = sorted(c for c in wmap.successors if wmap.is_station(c))
    if len(stations) >= 2:
        mat = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        ncomp, labels = connected_components(mat, directed=True, connection="strong")
        # reach[k]: bitmask of components reachable from component k
        comp_succ: dict[int, set[int]] = {k: set() for k in range(ncomp)}
        for a, b in zip(rows, cols):
            la, lb = labels[a], labels[b]
            if la != lb:
                comp_succ[la].add(lb)
        reach: dict[int, int] = {}

        def reach_of(k: int) -> int:
            stack = [(k, iter(sorted(comp_succ[k])))]
            mask_acc = {k: 1 << k}
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    m = mask_acc.pop(node)
                    reach[node] = m
                    if stack:
                        mask_acc[stack[-1][0]] |= m
                    continue
                if nxt in reach:
                    mask_acc[node] |= reach[nxt]
                elif nxt not in mask_acc:
                    mask_acc[nxt] = 1 << nxt
                    stack.append((nxt, iter(sorted(comp_succ[nxt]))))
            return reach[k]

        out_mask: dict[Coord, int] = {}
        in_mask: dict[Coord, int] = {}
        for s in stations:
            m = 0
            for r in wmap.successors[s]:
                if r in idx:
                    k = int(labels[idx[r]])
                    m |= reach[k] if k in reach else reach_of(k)
            out_mask[s] = m
            im = 0
            for r in wmap.predecessors[s]:
                if r in idx:
                    im |= 1 << int(labels[idx[r]])
            in_mask[s] = im
        groups_out: dict[int, list[Coord]] = {}
        groups_in: dict[int, list[Coord]] = {}
        for s in stations:
            groups_out.setdefault(out_mask[s], []).append(s)
            groups_in.setdefault(in_mask[s], []).append(s)
        for om, srcs in sorted(groups_out.items()):
            for im, dsts in sorted(groups_in.items()):
                if om & im:
                    continue
                for s1 in srcs:
                    bad = next((s2 for s2 in dsts if s2 != s1), None)
                    if bad is None:
                        continue
                    c2.passed = False
                    if len(c2.witnesses) < 5:
                        blocker = _station_path_blocker(wmap, s1, bad)
                        if blocker is None:
                            c2.witnesses.append(f"no path {s1} -> {bad}")
                        else:
                            c2.witnesses.append(f"{s1} -> {bad} blocked by station {blocker}")
                    break
    return ValidationReport([c1, c2])


def _sector_reach(wmap: WarehouseMap, sector: int, start: Coord, allow_stations: bool = False) -> set[Coord]:
    seen = {start}
    frontier = deque([start])
    while frontier:
        c = frontier.popleft()
        if c != start and not allow_stations and wmap.is_station(c):
            continue
        for n in wmap.successors[c]:
            if n not in seen and wmap.sector_of[n] == sector:
                seen.add(n)
                frontier.append(n)
    return seen


def validate_partition(wmap: WarehouseMap) -> ValidationReport:
    """Check P1 (<=1 intersection per sector), P2 (unique entryway per ordered
    neighbor pair) and P3 (station-free entry->exit paths)."""
    p1 = CriterionResult("P1", True)
    for s, sec in wmap.sectors.items():
        xs = sorted(c for c in sec.road_cells if wmap.is_intersection(c))
        if len(xs) > 1:
            p1.passed = False
            p1.witnesses.append(f"sector {sector_token(s)} intersections {xs}")

    p2 = CriterionResult("P2", True)
    for (sa, sb), edges in sorted(wmap.crossing_edges.items()):
        if len(edges) != 1:
            p2.passed = False
            p2.witnesses.append(f"{sector_token(sa)}->{sector_token(sb)} openings {edges}")

    p3 = CriterionResult("P3", True)
    for s, sec in wmap.sectors.items():
        exits = sorted({c for _, c in sec.exitways})
        for entry in sorted({c for _, c in sec.entryways}):
            reach = _sector_reach(wmap, s, entry)
            for ex in exits:
                if ex not in reach:
                    p3.passed = False
                    p3.witnesses.append(f"sector {sector_token(s)}: {entry} -> {ex}")
    return ValidationReport([p1, p2, p3])


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------


def _undirected_sector_bfs(wmap: WarehouseMap, sector: int, start: Coord) -> dict[Coord, int]:
    dist = {start: 0}
    frontier = deque([start])
    while frontier:
        c = frontier.popleft()
        if c != start and wmap.is_station(c):
            continue
        for n in wmap.neighbors4(c):
            if n not in dist and wmap.sector_of.get(n) == sector:
                if wmap.is_station(n) and wmap.is_station(c):
                    continue
                dist[n] = dist[c] + 1
                frontier.append(n)
    return dist


def sector_center(wmap: WarehouseMap, sector: int) -> Coord | None:
    """Road cell minimizing the maximum distance to the sector's cells."""
    sec = wmap.sectors[sector]
    best: tuple[float, Coord] | None = None
    for c in sorted(sec.road_cells):
        dist = _undirected_sector_bfs(wmap, sector, c)
        ecc = max(dist.get(v, math.inf) for v in sec.cells)
        if best is None or ecc < best[0]:
            best = (ecc, c)
    return None if best is None else best[1]


def build_sector_graph(wmap: WarehouseMap) -> SectorGraph:
    centers: dict[int, Coord] = {}
    for s in wmap.sector_ids:
        c = sector_center(wmap, s)
        if c is not None:
            centers[s] = c
    pairs = sorted(wmap.crossing_edges)
    edges: dict[tuple[int, int], SectorEdge] = {}
    if pairs:
        roads = sorted(c for c in wmap.successors if wmap.kind(c) is CellKind.ROAD)
        idx = {c: i for i, c in enumerate(roads)}
        rows, cols = [], []
        for a in roads:
            for b in wmap.neighbors4(a):
                if b in idx:
                    rows.append(idx[a])
                    cols.append(idx[b])
        mat = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(roads), len(roads)))
        srcs = sorted({a for a, _ in pairs})
        for a in srcs:
            if a not in centers:
                raise MapError(f"sector {sector_token(a)} has no road cell")
        dist = dijkstra(mat, directed=False, indices=[idx[centers[a]] for a in srcs], unweighted=True)
        row_of = {a: i for i, a in enumerate(srcs)}
        for sa, sb in pairs:
            if sb not in centers:
                raise MapError(f"sector {sector_token(sb)} has no road cell")
            d = float(dist[row_of[sa], idx[centers[sb]]])
            if not np.isfinite(d) or d <= 0:
                raise MapError(f"centers of sectors {sector_token(sa)} and {sector_token(sb)} are not connected")
            a, b = wmap.crossing_edges[(sa, sb)][0]
            edges[(sa, sb)] = SectorEdge(sa, sb, a, b, d)
    return SectorGraph(wmap.sector_ids, edges, centers)


def build_road_graph(wmap: WarehouseMap, sector_id: int) -> RoadGraph:
    if sector_id not in wmap.sectors:
        raise KeyError(f"no sector {sector_id}")
    cells = wmap.sectors[sector_id].cells
    succ = {c: tuple(n for n in wmap.successors[c] if n in cells) for c in cells}
    pred = {c: tuple(n for n in wmap.predecessors[c] if n in cells) for c in cells}
    stations = frozenset(c for c in cells if wmap.is_station(c))
    return RoadGraph(sector_id, frozenset(cells), succ, pred, stations)


def road_graphs(wmap: WarehouseMap) -> dict[int, RoadGraph]:
    return {s: build_road_graph(wmap, s) for s in wmap.sector_ids}

