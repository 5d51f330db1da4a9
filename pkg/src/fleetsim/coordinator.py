"""Per-sector space-time planning, entryway authority and K-step closures.

Each sector replans every robot inside it every tick and only the first
step of each plan is executed. Planning is prioritized cooperative A*
against a shared reservation table; an optional bounded conflict-based
search refines the joint plan. Safety of what actually executes does not
rest on the planner: :func:`resolve_moves` cancels any move that would
collide with the moves that survive.
"""
from __future__ import annotations

import enum
import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .worldmap import Coord, RoadGraph, SectorGraph

INF = math.inf


# --------------------------------------------------------------------------- paths


@dataclass(frozen=True)
class TimedPath:
    """Consecutive (cell, tick) steps. With ``hold`` the robot stays at the last
    cell afterwards; without it the robot leaves the sector when the path ends."""

    steps: tuple[tuple[Coord, int], ...]
    hold: bool = True

    @classmethod
    def from_cells(cls, cells: Sequence[Coord], start_tick: int = 0, hold: bool = True) -> "TimedPath":
        return cls(tuple((c, start_tick + i) for i, c in enumerate(cells)), hold)

    @property
    def cells(self) -> list[Coord]:
        return [c for c, _ in self.steps]

    @property
    def start_tick(self) -> int:
        return self.steps[0][1]

    @property
    def end_tick(self) -> int:
        return self.steps[-1][1]

    @property
    def cost(self) -> int:
        return len(self.steps) - 1

    @property
    def goal(self) -> Coord:
        return self.steps[-1][0]

    def at(self, t: int) -> Coord | None:
        i = t - self.start_tick
        if i < 0:
            return None
        if i < len(self.steps):
            return self.steps[i][0]
        return self.steps[-1][0] if self.hold else None

    @property
    def first_move(self) -> Coord:
        return self.steps[1][0] if len(self.steps) > 1 else self.steps[0][0]

    def is_valid(self, road: RoadGraph) -> bool:
        for (a, ta), (b, tb) in zip(self.steps, self.steps[1:]):
            if tb != ta + 1 or (a != b and b not in road.succ.get(a, ())):
                return False
        return True


class ReservationError(RuntimeError):
    pass


class ReservationTable:
    """Vertex and edge reservations plus cells closed at every tick."""

    def __init__(self, horizon: int | None = None):
        self.horizon = horizon
        self.vertex: dict[tuple[Coord, int], int] = {}
        self.edge: dict[tuple[Coord, Coord, int], int] = {}
        self.hold: dict[Coord, tuple[int, int]] = {}  # cell -> (from tick, owner)
        self.closed: dict[Coord, int] = {}  # cell -> owner (-1 for anonymous)
        self._last: dict[Coord, int] = {}

    def copy(self) -> "ReservationTable":
        t = ReservationTable(self.horizon)
        t.vertex = dict(self.vertex)
        t.edge = dict(self.edge)
        t.hold = dict(self.hold)
        t.closed = dict(self.closed)
        t._last = dict(self._last)
        return t

    def close(self, cell: Coord, owner: int = -1) -> None:
        self.closed[cell] = owner

    def vertex_free(self, cell: Coord, t: int) -> bool:
        if cell in self.closed or (cell, t) in self.vertex:
            return False
        h = self.hold.get(cell)
        return h is None or t < h[0]

    def edge_free(self, a: Coord, b: Coord, t: int) -> bool:
        """Moving a -> b between t and t+1 does not swap with a reserved b -> a."""
        return (b, a, t) not in self.edge

    def last_reserved(self, cell: Coord) -> float:
        if cell in self.closed or cell in self.hold:
            return INF
        return self._last.get(cell, -1)

    def owner(self, cell: Coord, t: int) -> int | None:
        if cell in self.closed:
            return self.closed[cell]
        o = self.vertex.get((cell, t))
        if o is not None:
            return o
        h = self.hold.get(cell)
        if h is not None and t >= h[0]:
            return h[1]
        return None

    def reserve_vertex(self, owner: int, cell: Coord, t: int) -> None:
        cur = self.owner(cell, t)
        if cur is not None and cur != owner:
            raise ReservationError(f"{cell}@{t} already reserved by {cur}")
        self.vertex[(cell, t)] = owner
        if t > self._last.get(cell, -1):
            self._last[cell] = t

    def reserve_path(self, owner: int, path: TimedPath) -> None:
        for (a, t), (b, _) in zip(path.steps, path.steps[1:]):
            self.reserve_vertex(owner, a, t)
            if a != b:
                self.edge[(a, b, t)] = owner
        c, t = path.steps[-1]
        self.reserve_vertex(owner, c, t)
        if path.hold:
            self.hold[c] = (t, owner)

    def forbid_vertex(self, cell: Coord, t: int) -> None:
        self.vertex[(cell, t)] = -1
        if t > self._last.get(cell, -1):
            self._last[cell] = t

    def forbid_edge(self, a: Coord, b: Coord, t: int) -> None:
        """Forbid the move a -> b between t and t+1 (stored as its reverse)."""
        self.edge[(b, a, t)] = -1


def reverse_distances(road: RoadGraph, goal: Coord, blocked: Iterable[Coord] = ()) -> dict[Coord, int]:
    """Station-free BFS distances to ``goal`` avoiding ``blocked`` cells."""
    blocked = set(blocked)
    dist = {goal: 0}
    frontier = deque([goal])
    stations = road.stations
    pred = road.pred
    while frontier:
        c = frontier.popleft()
        if c != goal and c in stations:
            continue
        d = dist[c] + 1
        for p in pred[c]:
            if p not in dist and p not in blocked:
                dist[p] = d
                frontier.append(p)
    return dist


def forward_reach(road: RoadGraph, start: Coord, blocked: Iterable[Coord] = ()) -> list[Coord]:
    blocked = set(blocked)
    seen = {start}
    order = [start]
    frontier = deque([start])
    while frontier:
        c = frontier.popleft()
        for n in road.succ[c]:
            if n in seen or n in blocked or n in road.stations:
                continue
            seen.add(n)
            order.append(n)
            frontier.append(n)
    return order


def space_time_astar(
    road: RoadGraph,
    start: Coord,
    goal: Coord,
    table: ReservationTable,
    start_tick: int = 0,
    horizon: int | None = None,
    hold_goal: bool = True,
    heuristic: Mapping[Coord, int] | None = None,
    max_expansions: int | None = None,
    arrive_after: int = -1,
) -> TimedPath | None:
    """Minimum-arrival timed path, or ``None`` when blocked within the horizon.

    Nodes are expanded in (f, h, cell, tick) order. With ``hold_goal`` the
    arrival must leave the goal free for every later tick. The final arrival
    is also later than ``arrive_after``.
    """
    if horizon is None:
        horizon = table.horizon if table.horizon is not None else 2 * max(road.diameter, 1)
    h = road.distances_to(goal) if heuristic is None else heuristic
    if start not in h or start not in road.succ:
        return None
    t_max = start_tick + horizon
    goal_after = max(table.last_reserved(goal) if hold_goal else -1, arrive_after)
    if goal_after >= t_max:
        return None
    succ = road.succ
    stations = road.stations
    vertex = table.vertex
    closed_cells = table.closed
    hold = table.hold
    edge = table.edge

    h0 = h[start]
    heap = [(start_tick + h0, h0, start, start_tick)]
    parent: dict[tuple[Coord, int], tuple[Coord, int] | None] = {(start, start_tick): None}
    done: set[tuple[Coord, int]] = set()
    expansions = 0
    while heap:
        f, hc, cell, t = heapq.heappop(heap)
        node = (cell, t)
        if node in done:
            continue
        done.add(node)
        if cell == goal and t > goal_after:
            steps = []
            cur: tuple[Coord, int] | None = node
            while cur is not None:
                steps.append(cur)
                cur = parent[cur]
            steps.reverse()
            return TimedPath(tuple(steps), hold_goal)
        if t >= t_max:
            continue
        expansions += 1
        if max_expansions is not None and expansions > max_expansions:
            return None
        t1 = t + 1
        for nb in itertools.chain(succ[cell], (cell,)):
            if nb != cell and nb in stations and nb != goal:
                continue
            hn = h.get(nb)
            if hn is None or t1 + hn > t_max:
                continue
            key = (nb, t1)
            if key in done or key in parent:
                continue
            if nb in closed_cells or key in vertex:
                continue
            hv = hold.get(nb)
            if hv is not None and t1 >= hv[0]:
                continue
            if nb != cell and (nb, cell, t) in edge:
                continue
            parent[key] = node
            heapq.heappush(heap, (t1 + hn, hn, nb, t1))
    return None


# ------------------------------------------------------------------------ conflicts


class ConflictKind(enum.Enum):
    VERTEX = "vertex"
    EDGE = "edge"


@dataclass(frozen=True)
class Conflict:
    tick: int
    kind: ConflictKind
    a: int
    b: int
    cell: Coord  # vertex cell, or the cell ``a`` leaves for edge conflicts
    other: Coord | None = None  # the cell ``a`` moves into (edge conflicts)


def _conflict_key(c: Conflict) -> tuple:
    return (c.tick, c.kind.value, c.a, c.b)


def detect_conflicts(paths: Mapping[int, TimedPath] | Sequence[TimedPath], first_only: bool = False) -> list[Conflict]:
    """All vertex and edge conflicts, earliest tick first."""
    items = sorted(paths.items()) if isinstance(paths, Mapping) else list(enumerate(paths))
    if len(items) < 2:
        return []
    t0 = min(p.start_tick for _, p in items)
    t1 = max(p.end_tick for _, p in items)
    out: list[Conflict] = []
    prev: dict[int, Coord | None] = {}
    for t in range(t0, t1 + 1):
        here: dict[Coord, list[int]] = {}
        now = {rid: p.at(t) for rid, p in items}
        for rid, c in now.items():
            if c is None:
                continue
            for other in here.get(c, ()):
                out.append(Conflict(t, ConflictKind.VERTEX, other, rid, c))
            here.setdefault(c, []).append(rid)
        if prev:
            moved_from = {}
            for rid, c in now.items():
                pc = prev.get(rid)
                if c is not None and pc is not None and pc != c:
                    moved_from[(pc, c)] = rid
            for (a, b), rid in sorted(moved_from.items(), key=lambda kv: kv[1]):
                other = moved_from.get((b, a))
                if other is not None and rid < other:
                    out.append(Conflict(t - 1, ConflictKind.EDGE, rid, other, a, b))
        if first_only and out:
            return sorted(out, key=_conflict_key)[:1]
        prev = now
    out.sort(key=_conflict_key)
    return out


# ----------------------------------------------------------------------------- CBS


@dataclass(frozen=True)
class Agent:
    id: int
    cell: Coord
    goal: Coord
    priority: tuple = ()
    hold_goal: bool = True


@dataclass
class CBSResult:
    paths: dict[int, TimedPath] | None
    nodes: int
    cost: float


def cbs(
    road: RoadGraph,
    agents: Sequence[Agent],
    base: ReservationTable | None = None,
    horizon: int | None = None,
    budget: int = 1000,
    heuristics: Mapping[int, Mapping[Coord, int]] | None = None,
    start_tick: int = 0,
) -> CBSResult:
    """Best-first conflict-based search on sum of path costs.

    ``base`` carries cells and reservations every agent must respect. Returns
    ``paths=None`` when the node budget runs out or no solution exists.

    The earliest conflict is split. When it happens at the goal of an agent
    that has already arrived for good, the split is on that agent's arrival
    instead: either it arrives after the conflict tick, or the other agent
    stays off that goal from the conflict tick on. Both halves together
    still cover every solution, so the optimum is kept, but the other agent
    no longer has to be pushed back one tick per node.
    """
    base = base or ReservationTable(horizon)
    heuristics = heuristics or {}

    def low_level(agent: Agent, cons: tuple) -> TimedPath | None:
        table = base.copy()
        arrive_after = -1
        for kind, a, b, t in cons:
            if kind == "v":
                table.forbid_vertex(a, t)
            elif kind == "e":
                table.forbid_edge(a, b, t)
            elif kind == "late":
                arrive_after = max(arrive_after, t)
            else:  # "off": never at ``a`` from tick t on
                held = table.hold.get(a)
                if held is None or held[0] > t:
                    table.hold[a] = (t, -1)
        return space_time_astar(
            road, agent.cell, agent.goal, table, start_tick, horizon, agent.hold_goal, heuristics.get(agent.id),
            arrive_after=arrive_after,
        )

    def parked(rid: int, paths: Mapping[int, TimedPath], cell: Coord, t: int) -> bool:
        p = paths[rid]
        return p.hold and p.goal == cell and p.end_tick <= t

    by_id = {a.id: a for a in agents}
    root_paths = {}
    for a in agents:
        p = low_level(a, ())
        if p is None:
            return CBSResult(None, 0, INF)
        root_paths[a.id] = p
    counter = itertools.count()
    root_cons = {a.id: () for a in agents}
    cost = sum(p.cost for p in root_paths.values())
    heap = [(cost, next(counter), root_paths, root_cons)]
    nodes = 0
    while heap:
        cost, _, paths, cons = heapq.heappop(heap)
        nodes += 1
        conflicts = detect_conflicts(paths, first_only=True)
        if not conflicts:
            return CBSResult(paths, nodes, cost)
        if nodes >= budget:
            return CBSResult(None, nodes, INF)
        c = conflicts[0]
        if c.kind is ConflictKind.VERTEX and (parked(c.a, paths, c.cell, c.tick) or parked(c.b, paths, c.cell, c.tick)):
            home, other = (c.a, c.b) if parked(c.a, paths, c.cell, c.tick) else (c.b, c.a)
            branches = [(home, ("late", c.cell, None, c.tick)), (other, ("off", c.cell, None, c.tick))]
        elif c.kind is ConflictKind.VERTEX:
            branches = [(c.a, ("v", c.cell, None, c.tick)), (c.b, ("v", c.cell, None, c.tick))]
        else:
            branches = [(c.a, ("e", c.cell, c.other, c.tick)), (c.b, ("e", c.other, c.cell, c.tick))]
        for rid, con in branches:
            new_cons = dict(cons)
            new_cons[rid] = cons[rid] + (con,)
            p = low_level(by_id[rid], new_cons[rid])
            if p is None:
                continue
            new_paths = dict(paths)
            new_paths[rid] = p
            new_cost = cost - paths[rid].cost + p.cost
            heapq.heappush(heap, (new_cost, next(counter), new_paths, new_cons))
    return CBSResult(None, nodes, INF)


# ------------------------------------------------------------------ sector planning


class ActionKind(enum.Enum):
    MOVE = "move"
    WAIT = "wait"
    STOP = "stop"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    cell: Coord | None = None

    @classmethod
    def move(cls, cell: Coord) -> "Action":
        return cls(ActionKind.MOVE, cell)


WAIT = Action(ActionKind.WAIT)
STOP = Action(ActionKind.STOP)


@dataclass
class StepPlan:
    actions: dict[int, Action]
    paths: dict[int, TimedPath]
    targets: dict[int, Coord]
    blocked: set[int]
    used_cbs: bool = False


def default_horizon(road: RoadGraph) -> int:
    return max(4, 2 * road.diameter)


def plan_sector_step(
    road: RoadGraph,
    agents: Sequence[Agent],
    obstacles: Iterable[Coord] = (),
    closed: Iterable[Coord] = (),
    horizon: int | None = None,
    cbs_budget: int = 0,
) -> StepPlan:
    """One rolling planning round for the robots of one sector.

    ``obstacles`` are cells held by robots that will not move this tick;
    ``closed`` are closure-region cells. Both are reserved at every tick.
    Agents inside ``closed`` get ``STOP``. Agents whose goal cannot be
    reached around the obstacles head for the reachable cell closest to it
    and hold there.
    """
    horizon = default_horizon(road) if horizon is None else horizon
    closed = set(closed)
    static = set(obstacles) | closed
    actions: dict[int, Action] = {}
    paths: dict[int, TimedPath] = {}
    targets: dict[int, Coord] = {}
    heur: dict[int, dict[Coord, int]] = {}
    hold: dict[int, bool] = {}
    for a in agents:
        if a.cell in closed:
            actions[a.id] = STOP
            paths[a.id] = TimedPath(((a.cell, 0),))
            static.add(a.cell)

    # Choose targets, nearest-to-goal first so queues settle in one pass.
    live = [a for a in agents if a.id not in actions]

    def static_h(a: Agent) -> float:
        return road.distances_to(a.goal).get(a.cell, INF)

    movers: list[Agent] = []
    for a in sorted(live, key=lambda a: (static_h(a), a.priority, a.id)):
        others = static - {a.cell}
        target, keep = a.goal, a.hold_goal
        dist = None
        if a.goal not in others:
            dist = reverse_distances(road, a.goal, others)
            if a.cell not in dist:
                dist = None
        if dist is None:
            ref = road.distances_to(a.goal)
            reach = forward_reach(road, a.cell, others)
            target = min(reach, key=lambda c: (ref.get(c, INF), c))
            if ref.get(target, INF) == INF:
                target = a.cell
            keep = True
            dist = reverse_distances(road, target, others)
        targets[a.id] = target
        if target == a.cell:
            actions[a.id] = WAIT
            paths[a.id] = TimedPath(((a.cell, 0),), keep)
            static.add(a.cell)
        else:
            heur[a.id] = dist
            hold[a.id] = keep
            movers.append(a)

    movers.sort(key=lambda a: (a.priority, a.id))
    base = ReservationTable(horizon)
    for c in sorted(static):
        base.close(c)
    table = base.copy()
    blocked_ids: set[int] = set()
    phase1: dict[int, TimedPath] = {}
    for a in movers:
        p = space_time_astar(road, a.cell, targets[a.id], table, 0, horizon, hold[a.id], heur[a.id])
        if p is None:
            blocked_ids.add(a.id)
            p = TimedPath(((a.cell, 0), (a.cell, 1)), True)
            for c, t in p.steps:
                if table.owner(c, t) is None:
                    table.reserve_vertex(a.id, c, t)
        else:
            table.reserve_path(a.id, p)
        phase1[a.id] = p

    used_cbs = False
    chosen = phase1
    if cbs_budget > 0 and len(movers) >= 2:
        plan_agents = [Agent(a.id, a.cell, targets[a.id], a.priority, hold[a.id]) for a in movers]
        res = cbs(road, plan_agents, base, horizon, cbs_budget, heur)
        if res.paths is not None:
            chosen = res.paths
            used_cbs = True
            blocked_ids = set()

    for a in movers:
        p = chosen[a.id]
        paths[a.id] = p
        nxt = p.first_move
        actions[a.id] = WAIT if nxt == a.cell else Action.move(nxt)
    return StepPlan(actions, paths, targets, blocked_ids, used_cbs)


# --------------------------------------------------------------- entryway authority


class Grant(enum.Enum):
    GRANTED = "granted"
    QUEUED = "queued"


class EntryError(RuntimeError):
    pass


@dataclass
class EntrywayAuthority:
    cell: Coord
    sector: int
    holder: int | None = None
    queue: deque = field(default_factory=deque)

    def apply(self, robot: int) -> None:
        if robot != self.holder and robot not in self.queue:
            self.queue.append(robot)

    def withdraw(self, robot: int) -> None:
        try:
            self.queue.remove(robot)
        except ValueError:
            pass

    def try_grant(self, robot: int, cell_free: bool) -> Grant:
        """Grant to ``robot`` if it heads the queue and the cell can be entered."""
        if self.holder is None and self.queue and self.queue[0] == robot and cell_free:
            self.queue.popleft()
            self.holder = robot
            return Grant.GRANTED
        return Grant.QUEUED

    def release(self, robot: int) -> None:
        if self.holder != robot:
            raise EntryError(f"robot {robot} does not hold entryway {self.cell}")
        self.holder = None


class EntrywayBook:
    """All entryway authorities of a map, keyed by entry cell."""

    def __init__(self, graph: SectorGraph):
        self.graph = graph
        self.by_cell: dict[Coord, EntrywayAuthority] = {}
        for (a, b), e in sorted(graph.edges.items()):
            if e.entry_cell not in self.by_cell:
                self.by_cell[e.entry_cell] = EntrywayAuthority(e.entry_cell, b)

    def authority(self, from_sector: int, to_sector: int) -> EntrywayAuthority:
        return self.by_cell[self.graph.edges[(from_sector, to_sector)].entry_cell]

    def request_entry(
        self,
        robot: int,
        robot_cell: Coord,
        from_sector: int,
        to_sector: int,
        cell_free: Callable[[Coord], bool] = lambda c: True,
    ) -> Grant:
        edge = self.graph.edges.get((from_sector, to_sector))
        if edge is None or edge.exit_cell != robot_cell:
            raise EntryError(f"robot {robot} at {robot_cell} is not at the exitway {from_sector}->{to_sector}")
        auth = self.by_cell[edge.entry_cell]
        auth.apply(robot)
        return auth.try_grant(robot, cell_free(edge.entry_cell))

    def release_entry(self, robot: int, entry_cell: Coord) -> EntrywayAuthority:
        auth = self.by_cell[entry_cell]
        auth.release(robot)
        return auth

    def withdraw_everywhere(self, robot: int) -> None:
        for auth in self.by_cell.values():
            if robot in auth.queue:
                auth.withdraw(robot)

    def held_by(self, robot: int) -> EntrywayAuthority | None:
        for auth in self.by_cell.values():
            if auth.holder == robot:
                return auth
        return None

    def holders(self) -> dict[int, Coord]:
        return {a.holder: c for c, a in self.by_cell.items() if a.holder is not None}


# -------------------------------------------------------------- K-step closures


@dataclass
class ClosureRegion:
    owner: int
    cells: frozenset[Coord]
    remaining: list[Coord]
    origin: Coord
    moves: int = 0


def remaining_moves(
    cell: Coord,
    last_plan: TimedPath | None,
    K: int,
    stop_cells: Iterable[Coord] = (),
    closed: Iterable[Coord] = (),
) -> list[Coord]:
    """Cells the failed robot will still visit: its last plan after ``cell``,
    waits removed, at most ``K`` cells, cut at the first exitway.

    A plan can predate the newest closures (a delayed robot keeps its old
    plan), so it also ends just before any cell in ``closed``."""
    stop_cells = set(stop_cells)
    closed = set(closed)
    if cell in stop_cells or last_plan is None:
        return []
    cells = last_plan.cells
    if len(cells) > 1 and cells[1] == cell:
        rest = cells[2:]
    elif cells[0] == cell:
        rest = cells[1:]
    else:
        return []
    out: list[Coord] = []
    prev = cell
    for c in rest:
        if c == prev:
            continue
        if c in closed:
            break
        out.append(c)
        prev = c
        if len(out) == K or c in stop_cells:
            break
    return out


def handle_comm_failure(
    robot: int,
    cell: Coord,
    last_plan: TimedPath | None,
    K: int,
    exit_cells: Iterable[Coord] = (),
    positions: Mapping[int, Coord] | None = None,
    closed: Iterable[Coord] = (),
) -> tuple[ClosureRegion, set[int]]:
    """Close the failed robot's next K cells; robots already inside must stop."""
    rest = remaining_moves(cell, last_plan, K, exit_cells, closed)
    region = ClosureRegion(robot, frozenset([cell, *rest]), rest, cell)
    stops = set()
    if positions:
        stops = {r for r, c in positions.items() if r != robot and c in region.cells}
    return region, stops


def handle_recovery(robot: int, regions: dict[int, ClosureRegion]) -> set[Coord]:
    """Drop the robot's region; returns the cells that actually reopen."""
    region = regions.pop(robot, None)
    if region is None:
        return set()
    still = set().union(*(r.cells for r in regions.values())) if regions else set()
    return set(region.cells) - still


def closed_cells(regions: Mapping[int, ClosureRegion]) -> dict[Coord, set[int]]:
    out: dict[Coord, set[int]] = {}
    for owner, reg in regions.items():
        for c in reg.cells:
            out.setdefault(c, set()).add(owner)
    return out


def stopped_robots(regions: Mapping[int, ClosureRegion], positions: Mapping[int, Coord], exempt: Iterable[int] = ()) -> set[int]:
    closed = closed_cells(regions)
    exempt = set(exempt)
    return {r for r, c in positions.items() if r not in exempt and c in closed and closed[c] != {r}}


# ------------------------------------------------------------------ move resolver


def resolve_moves(
    positions: Mapping[int, Coord],
    intents: Mapping[int, Coord],
    rank: Mapping[int, tuple],
    forbidden: Callable[[int, Coord], bool] | None = None,
) -> dict[int, Coord]:
    """Final cells with every vertex and swap conflict removed.

    Moves into forbidden cells are cancelled first. Then, until stable: a
    robot that stays keeps its cell against all movers; among movers to one
    free cell the best ``rank`` wins; both robots of a swap wait. Rotations
    of three or more robots are allowed.
    """
    final = dict(positions)
    for r, c in intents.items():
        if c != positions[r] and not (forbidden and forbidden(r, c)):
            final[r] = c
    occupant = {c: r for r, c in positions.items()}
    while True:
        changed = False
        claims: dict[Coord, list[int]] = {}
        for r, c in final.items():
            claims.setdefault(c, []).append(r)
        for c, rs in claims.items():
            if len(rs) < 2:
                continue
            stay = [r for r in rs if positions[r] == c]
            keep = stay[0] if stay else min(rs, key=lambda r: (rank[r], r))
            for r in rs:
                if r != keep and final[r] != positions[r]:
                    final[r] = positions[r]
                    changed = True
        for r in sorted(final):
            c = final[r]
            if c == positions[r]:
                continue
            o = occupant.get(c)
            if o is not None and o != r and final[o] == positions[r]:
                final[r] = positions[r]
                final[o] = positions[o]
                changed = True
        if not changed:
            return final
