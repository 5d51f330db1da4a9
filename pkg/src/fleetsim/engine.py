"""Tick loop, robot lifecycle and run metrics."""
from __future__ import annotations

import csv
import enum
import io
import math
import time
from dataclasses import dataclass, field, fields
from typing import Sequence, TextIO

import numpy as np

from .coordinator import (
    WAIT,
    ActionKind,
    Agent,
    ClosureRegion,
    EntrywayBook,
    Grant,
    TimedPath,
    closed_cells,
    default_horizon,
    handle_comm_failure,
    handle_recovery,
    plan_sector_step,
    resolve_moves,
)
from .faults import FaultInjector, FaultParams
from .tasks import (
    RouteError,
    SectorRoute,
    Task,
    TaskQueues,
    TaskStatus,
    allocate,
    assign,
    complete_task,
    enqueue_task,
    plan_sector_route,
    weighted_costs_from,
)
from .traffic import TrafficState, WeightParams, update_traffic, write_heat_rows, HEAT_COLUMNS
from .worldmap import Coord, WarehouseMap, build_sector_graph, road_graphs, sector_token


class Mode(enum.Enum):
    IDLE = "idle"
    TO_PICKUP = "to_pickup"
    CARRYING = "carrying"
    TO_STATION = "to_station"


@dataclass
class RobotState:
    id: int
    cell: Coord
    sector: int
    mode: Mode = Mode.IDLE
    task: int | None = None
    priority_tick: int = 0
    delayed: bool = False
    comm_failed: bool = False
    stopped: bool = False
    last_plan: TimedPath | None = None
    route: SectorRoute | None = None
    local_goal: Coord | None = None
    home: Coord | None = None  # claimed return station
    just_dropped: bool = False

    @property
    def idle(self) -> bool:
        return self.mode is Mode.IDLE

    @property
    def flags(self) -> str:
        out = [name for name, on in (("delayed", self.delayed), ("comm_failed", self.comm_failed), ("stopped", self.stopped)) if on]
        return "|".join(out) if out else "ok"


class InvariantViolation(RuntimeError):
    def __init__(self, message: str, dump: str = ""):
        super().__init__(message + ("\n" + dump if dump else ""))
        self.dump = dump


@dataclass
class SimConfig:
    K: int = 3
    weights: WeightParams = field(default_factory=WeightParams)
    faults: FaultParams = field(default_factory=lambda: FaultParams(comm_failures=False))
    seed: int = 0
    tick_cap: int | None = None
    cbs_budget: int = 0
    horizon: int | None = None
    check_invariants: bool = True


@dataclass
class MetricsReport:
    makespan: int = 0
    ave_cal_time: float = 0.0
    ave_delay: float = 0.0
    ave_lost: float = 0.0
    ave_task_waiting_time: float = math.nan
    ave_task_finish_time: float = math.nan
    max_max_heat: float = 0.0
    ave_max_heat: float = 0.0
    ave_ave_heat: float = 0.0
    ticks: int = 0
    tasks_done: int = 0
    tasks_pending: int = 0
    complete: bool = True

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [getattr(self, c) for c in self.columns()]


@dataclass
class ClosureRecord:
    owner: int
    cells: frozenset[Coord]
    start: int
    end: int | None = None


class Simulation:
    """A single seeded run. ``tick()`` advances one step of the pipeline."""

    def __init__(
        self,
        wmap: WarehouseMap,
        tasks: Sequence[Task],
        n_robots: int,
        config: SimConfig | None = None,
        trace: TextIO | None = None,
        heat: TextIO | None = None,
        starts: Sequence[Coord] | None = None,
    ):
        self.map = wmap
        self.config = config or SimConfig()
        self.graph = build_sector_graph(wmap)
        self.roads = road_graphs(wmap)
        self.horizons = {s: self.config.horizon or default_horizon(r) for s, r in self.roads.items()}
        self.exit_cells = {s: frozenset(c for _, c in sec.exitways) for s, sec in wmap.sectors.items()}
        seq = np.random.SeedSequence(self.config.seed)
        place_seq, fault_seq = seq.spawn(2)
        place_rng = np.random.default_rng(place_seq)
        self.injector = FaultInjector(self.config.faults, np.random.default_rng(fault_seq))

        stations = wmap.robot_stations
        if starts is None:
            if n_robots > len(stations):
                raise ValueError(f"{n_robots} robots but only {len(stations)} robot stations")
            picks = sorted(place_rng.choice(len(stations), size=n_robots, replace=False)) if n_robots else []
            starts = [stations[i] for i in picks]
        self.robots = [RobotState(i, c, wmap.sector_of[c]) for i, c in enumerate(starts)]
        self.tasks = sorted((Task(t.id, t.publish_time, t.pickup, t.work, t.priority) for t in tasks), key=lambda t: (t.publish_time, t.id))
        self.task_by_id = {t.id: t for t in self.tasks}
        self._next_task = 0
        self.queues = TaskQueues()
        self.book = EntrywayBook(self.graph)
        self.regions: dict[int, ClosureRegion] = {}
        self.closure_log: list[ClosureRecord] = []
        self.claimed: set[Coord] = set()
        self.tick_no = 0
        self.traffic: TrafficState | None = None
        cap = self.config.tick_cap
        self.tick_cap = cap if cap is not None else 50 * (len(self.tasks) + n_robots)

        self.cal_time = 0.0
        self.delay_total = 0
        self.lost_total = 0
        self.max_heats: list[float] = []
        self.mean_heats: list[float] = []
        self.violations: list[str] = []
        self.fail_moves: dict[int, int] = {}

        self.trace = csv.writer(trace, lineterminator="\n") if trace is not None else None
        if self.trace:
            self.trace.writerow(["tick", "robot_id", "x", "y", "mode", "sector", "flags"])
        self.heat = csv.writer(heat, lineterminator="\n") if heat is not None else None
        if self.heat:
            self.heat.writerow(HEAT_COLUMNS)
        self.snapshots: list[TrafficState] = []
        self.keep_snapshots_every: int | None = None

    # ----------------------------------------------------------------- queries
    def positions(self) -> dict[int, Coord]:
        return {r.id: r.cell for r in self.robots}

    def leg_goal(self, r: RobotState) -> Coord | None:
        if r.mode is Mode.TO_PICKUP:
            return self.task_by_id[r.task].pickup
        if r.mode is Mode.CARRYING:
            return self.task_by_id[r.task].work
        if r.mode is Mode.TO_STATION:
            return r.home
        return None

    @property
    def done(self) -> bool:
        return all(t.status is TaskStatus.DONE for t in self.tasks)

    # ------------------------------------------------------------------ pipeline
    def tick(self) -> None:
        t = self.tick_no
        robots = self.robots
        occupied = {r.cell: r.id for r in robots}

        # (1) faults: failures and recoveries, then motion delays
        newly, recovered = self.injector.comm_step([r.id for r in robots], [r.id for r in robots if r.comm_failed])
        delays = self.injector.delays([r.id for r in robots if not r.idle])
        for r in robots:
            r.delayed = r.id in delays

        # (2) handlers
        for rid in sorted(recovered):
            r = robots[rid]
            handle_recovery(rid, self.regions)
            r.comm_failed = False
            r.route = None
            for rec in self.closure_log:
                if rec.owner == rid and rec.end is None:
                    rec.end = t
        if newly is not None:
            r = robots[newly]
            region, _ = handle_comm_failure(newly, r.cell, r.last_plan, self.config.K, self.exit_cells[r.sector],
                                            closed=closed_cells(self.regions))
            r.comm_failed = True
            self.regions[newly] = region
            self.closure_log.append(ClosureRecord(newly, region.cells, t))
            self.fail_moves[newly] = 0
            self.book.withdraw_everywhere(newly)
        closed = closed_cells(self.regions)
        for r in robots:
            owners = closed.get(r.cell)
            r.stopped = (not r.comm_failed) and owners is not None and owners != {r.id}

        # (3) traffic
        t0 = time.perf_counter()
        self.traffic = update_traffic(self.map, self.graph, robots, self.config.weights, t)

        # (4) tasks, allocation, routes
        while self._next_task < len(self.tasks) and self.tasks[self._next_task].publish_time <= t:
            enqueue_task(self.tasks[self._next_task], self.queues)
            self._next_task += 1
        self._allocate(t)
        for r in robots:
            if not r.idle and not r.comm_failed:
                self._update_local_goal(r, occupied)

        # (5) sector planning
        intents: dict[int, Coord] = {}
        by_sector: dict[int, list[RobotState]] = {}
        for r in robots:
            by_sector.setdefault(r.sector, []).append(r)
        for s in sorted(by_sector):
            self._plan_sector(s, by_sector[s], closed, intents)

        # (6) entry requests
        crossings = self._entries(occupied, closed, intents)
        self.cal_time += time.perf_counter() - t0

        # (7) apply
        for r in robots:
            if r.comm_failed and not r.delayed:
                reg = self.regions[r.id]
                if reg.remaining:
                    intents[r.id] = reg.remaining[0]
        self._apply(intents, crossings, closed, t)

        # (8) lifecycle events and authority release
        self._events(t)
        for rid, cell in sorted(self.book.holders().items()):
            r = robots[rid]
            if r.cell != cell and r.sector == self.book.by_cell[cell].sector:
                self.book.release_entry(rid, cell)

        # (9) metrics
        self.delay_total += len(delays)
        self.lost_total += sum(1 for r in robots if r.comm_failed)
        self.max_heats.append(self.traffic.max_heat)
        self.mean_heats.append(self.traffic.mean_heat)
        if self.heat:
            write_heat_rows(self.heat, self.traffic)
        if self.keep_snapshots_every and t % self.keep_snapshots_every == 0:
            self.snapshots.append(self.traffic)
        if self.trace:
            w = self.trace.writerow
            for r in robots:
                w([t, r.id, r.cell[0], r.cell[1], r.mode.value, r.sector, r.flags])
        self.tick_no += 1

    # ---------------------------------------------------------------- step (4)
    def _allocate(self, t: int) -> None:
        robots = self.robots
        pool = [
            (r.id, r.cell)
            for r in robots
            if (r.idle or r.just_dropped) and not r.comm_failed
        ]
        for task_id, rid in allocate(self.queues, pool, self.map, self.traffic):
            task = self.task_by_id[task_id]
            assign(task, rid, self.queues, t)
            r = robots[rid]
            r.task = task_id
            r.mode = Mode.TO_PICKUP
            r.priority_tick = t
            r.route = None
            r.just_dropped = False
        for r in robots:
            if r.just_dropped and not r.comm_failed:
                r.just_dropped = False
                r.mode = Mode.TO_STATION
                r.route = None
                self._claim_home(r)
            elif r.mode is Mode.TO_STATION and r.home is None and not r.comm_failed:
                self._claim_home(r)

    def _first_hops(self, r: RobotState) -> list[int]:
        road = self.roads[r.sector]
        hops = []
        for nb in self.graph.successors(r.sector):
            ex = self.graph.edges[(r.sector, nb)].exit_cell
            if ex == r.cell or r.cell in road.distances_to(ex):
                hops.append(nb)
        return hops

    def _claim_home(self, r: RobotState) -> None:
        occupied = {x.cell for x in self.robots}
        free = [c for c in self.map.robot_stations if c not in occupied and c not in self.claimed]
        if not free:
            return
        road = self.roads[r.sector]
        here = [c for c in free if self.map.sector_of[c] == r.sector and r.cell in road.distances_to(c)]
        if here:
            best = min(here)
        else:
            dist, _ = weighted_costs_from(self.graph, self.traffic, r.sector, self._first_hops(r))
            cand = [(dist[self.map.sector_of[c]], c) for c in free if self.map.sector_of[c] in dist]
            if not cand:
                return
            best = min(cand)[1]
        r.home = best
        self.claimed.add(best)

    def _update_local_goal(self, r: RobotState, occupied: dict[Coord, int]) -> None:
        goal = self.leg_goal(r)
        if goal is None:
            r.local_goal = r.cell
            return
        road = self.roads[r.sector]
        # a station still held by the previous robot: drive on and come back
        # instead of parking on its dock and locking the occupant in
        taken = occupied.get(goal, r.id) != r.id
        if r.route is None or r.route.sectors[0] != r.sector or (
            r.local_goal is not None and r.local_goal != r.cell and r.cell not in road.distances_to(r.local_goal)
        ) or (taken and r.route.next_sector is None):
            goal_sector = self.map.sector_of[goal]
            try:
                if goal_sector == r.sector and r.cell in road.distances_to(goal) and not (taken and self._first_hops(r)):
                    r.route = SectorRoute((r.sector,), 0.0)
                else:
                    r.route = plan_sector_route(
                        self.graph, self.traffic, r.sector, goal_sector, self._first_hops(r), stay_allowed=False
                    )
            except RouteError:
                r.route = None
                r.local_goal = r.cell
                return
        nxt = r.route.next_sector
        r.local_goal = goal if nxt is None else self.graph.edges[(r.sector, nxt)].exit_cell

    # ---------------------------------------------------------------- step (5)
    def _plan_sector(self, s: int, members: list[RobotState], closed: dict[Coord, set[int]], intents: dict[int, Coord]) -> None:
        road = self.roads[s]
        agents = []
        obstacles = set()
        exits = self.exit_cells[s]
        for r in members:
            if r.idle or r.delayed or r.comm_failed or r.stopped or r.local_goal is None:
                obstacles.add(r.cell)
                if r.stopped or (r.idle and not r.comm_failed):
                    r.last_plan = None
                continue
            goal = r.local_goal
            hold = not (goal in exits and r.route is not None and r.route.next_sector is not None)
            agents.append(Agent(r.id, r.cell, goal, (r.priority_tick, r.id), hold))
        if not agents:
            return
        region_cells = [c for c in closed if c in road.vertices]
        plan = plan_sector_step(road, agents, obstacles, region_cells, self.horizons[s], self.config.cbs_budget)
        for a in agents:
            r = self.robots[a.id]
            r.last_plan = plan.paths.get(a.id)
            act = plan.actions[a.id]
            if act.kind is ActionKind.MOVE:
                intents[a.id] = act.cell

    # ---------------------------------------------------------------- step (6)
    def _entries(self, occupied: dict[Coord, int], closed: dict[Coord, set[int]], intents: dict[int, Coord]) -> dict[int, Coord]:
        targeted = set(intents.values())
        applicants = []
        for r in self.robots:
            if r.idle or r.comm_failed or r.route is None or r.route.next_sector is None:
                continue
            if r.cell != r.local_goal:
                continue
            applicants.append(r)
        # robots that left their exitway no longer queue
        at_exit = {r.id for r in applicants}
        for auth in self.book.by_cell.values():
            for rid in list(auth.queue):
                if rid not in at_exit:
                    auth.withdraw(rid)
        for r in applicants:
            self.book.authority(r.sector, r.route.next_sector).apply(r.id)
        crossings: dict[int, Coord] = {}
        for r in applicants:
            if r.delayed or r.stopped:
                continue
            auth = self.book.authority(r.sector, r.route.next_sector)
            c = auth.cell
            free = c not in occupied and c not in closed and c not in targeted
            if auth.holder == r.id and free:
                crossings[r.id] = c  # granted earlier but the move did not happen
                targeted.add(c)
            elif auth.try_grant(r.id, free) is Grant.GRANTED:
                crossings[r.id] = c
                targeted.add(c)
        return crossings

    # ---------------------------------------------------------------- step (7)
    def _apply(self, intents: dict[int, Coord], crossings: dict[int, Coord], closed: dict[Coord, set[int]], t: int) -> None:
        robots = self.robots
        positions = {r.id: r.cell for r in robots}
        moves = dict(intents)
        moves.update(crossings)
        for r in robots:
            if r.delayed or r.stopped or r.idle:
                moves.pop(r.id, None)
        rank = {r.id: (0 if r.comm_failed else 1, r.priority_tick, r.id) for r in robots}

        def forbidden(rid: int, c: Coord) -> bool:
            owners = closed.get(c)
            return owners is not None and rid not in owners

        final = resolve_moves(positions, moves, rank, forbidden)
        if self.config.check_invariants:
            self._check_motion(positions, final, crossings, closed, t)
        for r in robots:
            c = final[r.id]
            if c == r.cell:
                continue
            r.cell = c
            r.sector = self.map.sector_of[c]
            if r.comm_failed:
                reg = self.regions[r.id]
                reg.remaining.pop(0)
                reg.moves += 1
                self.fail_moves[r.id] = self.fail_moves.get(r.id, 0) + 1
                if reg.moves > self.config.K:
                    self.violations.append(f"tick {t}: robot {r.id} moved {reg.moves} > K cells after failure")

    def _check_motion(self, before, after, crossings, closed, t) -> None:
        cells = list(after.values())
        if len(set(cells)) != len(cells):
            self._abort(f"tick {t}: vertex conflict in executed motion")
        src = {c: r for r, c in before.items()}
        for r, c in after.items():
            o = src.get(c)
            if o is not None and o != r and after[o] == before[r]:
                self._abort(f"tick {t}: robots {r} and {o} swapped")
            if c != before[r]:
                if c not in self.map.successors[before[r]]:
                    self._abort(f"tick {t}: robot {r} jumped {before[r]} -> {c}")
                if self.map.sector_of[c] != self.map.sector_of[before[r]] and crossings.get(r) != c:
                    self._abort(f"tick {t}: robot {r} crossed without entryway authority")
                owners = closed.get(c)
                if owners is not None and r not in owners:
                    self._abort(f"tick {t}: robot {r} entered a closure region at {c}")

    def _abort(self, message: str) -> None:
        buf = io.StringIO()
        buf.write(f"tick {self.tick_no}\n")
        for r in self.robots:
            buf.write(f"{r.id} {r.cell} {r.mode.value} s={sector_token(r.sector)} {r.flags} goal={r.local_goal}\n")
        raise InvariantViolation(message, buf.getvalue())

    # ---------------------------------------------------------------- step (8)
    def _events(self, t: int) -> None:
        for r in self.robots:
            if r.mode is Mode.TO_PICKUP:
                task = self.task_by_id[r.task]
                if r.cell == task.pickup:
                    task.pickup_time = t
                    task.status = TaskStatus.PICKED_UP
                    r.mode = Mode.CARRYING
                    r.route = None
            elif r.mode is Mode.CARRYING:
                task = self.task_by_id[r.task]
                if r.cell == task.work:
                    complete_task(task, self.queues, t)
                    r.task = None
                    r.mode = Mode.TO_STATION
                    r.just_dropped = True
                    r.route = None
            elif r.mode is Mode.TO_STATION and r.home is not None and r.cell == r.home:
                self.claimed.discard(r.home)
                r.home = None
                r.mode = Mode.IDLE
                r.route = None
                r.local_goal = None

    # ---------------------------------------------------------------------- run
    def run(self) -> MetricsReport:
        while not self.done and self.tick_no < self.tick_cap:
            self.tick()
        return self.report()

    def report(self) -> MetricsReport:
        done = [t for t in self.tasks if t.status is TaskStatus.DONE]
        n = max(self.tick_no, 1)
        rep = MetricsReport(
            makespan=max((t.finish_time for t in done), default=0),
            ave_cal_time=self.cal_time / n if self.tick_no else 0.0,
            ave_delay=self.delay_total / n if self.tick_no else 0.0,
            ave_lost=self.lost_total / n if self.tick_no else 0.0,
            ticks=self.tick_no,
            tasks_done=len(done),
            tasks_pending=len(self.tasks) - len(done),
            complete=len(done) == len(self.tasks),
        )
        if done:
            rep.ave_task_waiting_time = float(np.mean([t.pickup_time - t.publish_time for t in done]))
            rep.ave_task_finish_time = float(np.mean([t.finish_time - t.publish_time for t in done]))
        if self.max_heats:
            rep.max_max_heat = float(max(self.max_heats))
            rep.ave_max_heat = float(np.mean(self.max_heats))
            rep.ave_ave_heat = float(np.mean(self.mean_heats))
        return rep
