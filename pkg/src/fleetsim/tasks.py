"""Task lifecycle, C3/C4 queues, greedy allocation and sector-level routing."""
from __future__ import annotations

import bisect
import csv
import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .traffic import TrafficState
from .worldmap import Coord, SectorGraph, WarehouseMap


class TaskStatus(enum.Enum):
    WAITING = "waiting"
    QUEUED = "queued"
    ASSIGNED = "assigned"
    PICKED_UP = "picked_up"
    DONE = "done"


ACTIVE = (TaskStatus.QUEUED, TaskStatus.ASSIGNED, TaskStatus.PICKED_UP)


@dataclass
class Task:
    id: int
    publish_time: int  # T_O
    pickup: Coord  # T_T
    work: Coord  # T_W
    priority: float | None = None
    robot: int | None = None  # T_R
    assign_time: int | None = None  # T_A
    pickup_time: int | None = None  # T_B
    finish_time: int | None = None  # T_F
    status: TaskStatus | None = None

    @property
    def key(self) -> tuple[float, int]:
        return (self.publish_time if self.priority is None else self.priority, self.id)

    def timestamps_monotone(self) -> bool:
        seq = [t for t in (self.publish_time, self.assign_time, self.pickup_time, self.finish_time) if t is not None]
        return all(a <= b for a, b in zip(seq, seq[1:]))


class QueueError(ValueError):
    pass


@dataclass
class TaskQueues:
    unassigned: list[Task] = field(default_factory=list)  # sorted by key
    waiting: list[tuple[Task, int]] = field(default_factory=list)  # (task, blocker id)
    tasks: dict[int, Task] = field(default_factory=dict)
    # live station claims under C3: station -> task id
    pickup_owner: dict[Coord, int] = field(default_factory=dict)
    work_owner: dict[Coord, int] = field(default_factory=dict)

    def blocker_of(self, task: Task) -> int | None:
        a = self.pickup_owner.get(task.pickup)
        b = self.work_owner.get(task.work)
        if a is None:
            return b
        if b is None:
            return a
        return min(a, b, key=lambda i: self.tasks[i].key)

    def activate(self, task: Task) -> None:
        task.status = TaskStatus.QUEUED
        self.pickup_owner[task.pickup] = task.id
        self.work_owner[task.work] = task.id
        keys = [t.key for t in self.unassigned]
        self.unassigned.insert(bisect.bisect(keys, task.key), task)

    def retire(self, task: Task) -> None:
        if self.pickup_owner.get(task.pickup) == task.id:
            del self.pickup_owner[task.pickup]
        if self.work_owner.get(task.work) == task.id:
            del self.work_owner[task.work]

    def active_tasks(self) -> list[Task]:
        return [t for t in self.tasks.values() if t.status in ACTIVE]

    def check_c3(self) -> bool:
        live = self.active_tasks()
        return len({t.pickup for t in live}) == len(live) and len({t.work for t in live}) == len(live)


def enqueue_task(task: Task, queues: TaskQueues) -> TaskQueues:
    if task.id in queues.tasks:
        raise QueueError(f"duplicate task id {task.id}")
    queues.tasks[task.id] = task
    blocker = queues.blocker_of(task)
    if blocker is None:
        queues.activate(task)
    else:
        task.status = TaskStatus.WAITING
        queues.waiting.append((task, blocker))
    return queues


def complete_task(task: Task, queues: TaskQueues, tick: int) -> TaskQueues:
    task.status = TaskStatus.DONE
    task.finish_time = tick
    queues.retire(task)
    return release_waiting(task, queues)


def release_waiting(completed: Task, queues: TaskQueues) -> TaskQueues:
    """Re-screen, in priority order, the waiters whose blocker just finished.

    A waiter released here can become the blocker of a later one.
    """
    if completed.status is not TaskStatus.DONE:
        raise QueueError("release_waiting needs a completed task")
    keep = []
    for task, blocker in sorted(queues.waiting, key=lambda tb: tb[0].key):
        if blocker != completed.id:
            keep.append((task, blocker))
            continue
        nb = queues.blocker_of(task)
        if nb is None:
            queues.activate(task)
        else:
            keep.append((task, nb))
    queues.waiting = keep
    return queues


def allocate(
    queues: TaskQueues,
    free_robots: Sequence[tuple[int, Coord]],
    wmap: WarehouseMap,
    traffic: TrafficState | None = None,
) -> list[tuple[int, int]]:
    """Greedy: tasks by priority, each to the nearest free robot (static distance, then id).

    ``traffic`` is accepted for interface symmetry; matching ignores dynamic weights.
    """
    if not free_robots or not queues.unassigned:
        return []
    transit = wmap.transit_index
    pool = sorted(free_robots)
    ids = np.array([r for r, _ in pool])
    nodes = np.array([transit.start_node(c) for _, c in pool])
    sinks = np.array([transit.index[c] for _, c in pool])
    alive = np.ones(len(pool), dtype=bool)
    out = []
    for task in list(queues.unassigned):
        if not alive.any():
            break
        dist = transit.distances_to(task.pickup)[nodes]
        dist = np.where(alive, dist, np.inf)
        dist = np.where(alive & (sinks == transit.index[task.pickup]), 0.0, dist)
        k = int(np.argmin(dist))  # first minimum = lowest id, pool is id-sorted
        if not np.isfinite(dist[k]):
            continue
        alive[k] = False
        out.append((task.id, int(ids[k])))
    return out


def assign(task: Task, robot: int, queues: TaskQueues, tick: int) -> None:
    queues.unassigned.remove(task)
    task.status = TaskStatus.ASSIGNED
    task.robot = robot
    task.assign_time = tick


# --------------------------------------------------------------------------- routes


class RouteError(ValueError):
    pass


@dataclass(frozen=True)
class SectorRoute:
    sectors: tuple[int, ...]
    cost: float

    @property
    def next_sector(self) -> int | None:
        return self.sectors[1] if len(self.sectors) > 1 else None


def plan_sector_route(
    graph: SectorGraph,
    traffic: TrafficState,
    from_sector: int,
    to_sector: int,
    first_hops: Iterable[int] | None = None,
    stay_allowed: bool = True,
) -> SectorRoute:
    """Weighted A* on the sector graph with the static distance as heuristic.

    ``first_hops`` restricts the first move (exits the robot can actually
    reach). When ``stay_allowed`` is false the route must leave ``from_sector``
    even if it equals ``to_sector``.
    """
    if from_sector not in graph.centers and from_sector not in graph.vertices:
        raise RouteError(f"unknown sector {from_sector}")
    if from_sector == to_sector and stay_allowed:
        return SectorRoute((from_sector,), 0.0)
    hd = graph.static_distance
    hops = graph.successors(from_sector) if first_hops is None else sorted(set(first_hops))

    def h(s: int) -> float:
        return hd[s].get(to_sector, math.inf)

    heap: list[tuple[float, tuple[int, ...], float]] = []
    for s in hops:
        g = traffic.weights[(from_sector, s)]
        hv = h(s)
        if math.isfinite(hv):
            heapq.heappush(heap, (g + hv, (from_sector, s), g))
    closed: set[int] = set()
    while heap:
        f, path, g = heapq.heappop(heap)
        node = path[-1]
        if node == to_sector:
            return SectorRoute(path, g)
        if node in closed:
            continue
        closed.add(node)
        for nb in graph.successors(node):
            if nb in closed:
                continue
            g2 = g + traffic.weights[(node, nb)]
            hv = h(nb)
            if math.isfinite(hv):
                heapq.heappush(heap, (g2 + hv, path + (nb,), g2))
    raise RouteError(f"sector {to_sector} unreachable from {from_sector}")


def weighted_costs_from(
    graph: SectorGraph, traffic: TrafficState, from_sector: int, first_hops: Iterable[int] | None = None
) -> tuple[dict[int, float], dict[int, tuple[int, ...]]]:
    """Dijkstra over current weights; the entry for ``from_sector`` is the
    cheapest way to leave it and come back."""
    hops = graph.successors(from_sector) if first_hops is None else sorted(set(first_hops))
    dist: dict[int, float] = {}
    path: dict[int, tuple[int, ...]] = {}
    heap = [(traffic.weights[(from_sector, s)], (from_sector, s)) for s in hops]
    heapq.heapify(heap)
    while heap:
        g, p = heapq.heappop(heap)
        node = p[-1]
        if node in dist:
            continue
        dist[node] = g
        path[node] = p
        for nb in graph.successors(node):
            if nb not in dist:
                heapq.heappush(heap, (g + traffic.weights[(node, nb)], p + (nb,)))
    return dist, path


# ------------------------------------------------------------------- file formats

TASK_COLUMNS = ["publish_tick", "pickup_x", "pickup_y", "work_x", "work_y"]
REPORT_COLUMNS = ["id", "T_O", "T_A", "T_B", "T_F", "robot_id"]


class TaskFileError(ValueError):
    pass


def read_tasks(fh: TextIO) -> list[Task]:
    reader = csv.reader(fh)
    tasks = []
    for lineno, row in enumerate(reader, start=1):
        if not row or not "".join(row).strip():
            continue
        if lineno == 1 and row[0].strip() == "publish_tick":
            continue
        if len(row) not in (5, 6):
            raise TaskFileError(f"line {lineno}: expected 5 or 6 fields, got {len(row)}")
        try:
            t, px, py, wx, wy = (int(v) for v in row[:5])
            prio = float(row[5]) if len(row) == 6 and row[5].strip() else None
        except ValueError as exc:
            raise TaskFileError(f"line {lineno}: {exc}") from None
        tasks.append(Task(len(tasks), t, (px, py), (wx, wy), prio))
    return tasks


def load_tasks(path) -> list[Task]:
    with open(path, newline="", encoding="utf-8") as fh:
        return read_tasks(fh)


def write_tasks(fh: TextIO, tasks: Iterable[Task]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    tasks = list(tasks)
    with_prio = any(t.priority is not None for t in tasks)
    w.writerow(TASK_COLUMNS + (["priority"] if with_prio else []))
    for t in tasks:
        row = [t.publish_time, t.pickup[0], t.pickup[1], t.work[0], t.work[1]]
        if with_prio:
            row.append("" if t.priority is None else repr(t.priority))
        w.writerow(row)


def save_tasks(path, tasks: Iterable[Task]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_tasks(fh, tasks)


def write_report(fh: TextIO, tasks: Iterable[Task]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for t in sorted(tasks, key=lambda t: t.id):
        if t.status is TaskStatus.DONE:
            w.writerow([t.id, t.publish_time, t.assign_time, t.pickup_time, t.finish_time, t.robot])


def station_draws(n_stations: int, n: int, rng: np.random.Generator, mode: str = "deck") -> np.ndarray:
    """Station indices for ``n`` tasks.

    ``deck`` deals stations from repeatedly shuffled full decks, so a station
    is reused only after every other one has been drawn; ``iid`` draws each
    task independently and uniformly.
    """
    if mode == "iid":
        return rng.integers(n_stations, size=n)
    if mode != "deck":
        raise ValueError(f"unknown station draw mode {mode!r}")
    decks = [rng.permutation(n_stations) for _ in range(-(-n // n_stations))]
    return np.concatenate(decks)[:n] if decks else np.zeros(0, dtype=int)


def generate_tasks(
    wmap: WarehouseMap, n: int, frequency: float, rng: np.random.Generator, mode: str = "deck"
) -> list[Task]:
    """``n`` tasks published at ``frequency`` tasks per tick."""
    pickups, works = wmap.pickup_stations, wmap.working_stations
    if not pickups or not works:
        raise ValueError("map needs pickup and working stations")
    if frequency <= 0:
        raise ValueError("frequency must be positive")
    pi = station_draws(len(pickups), n, rng, mode)
    wi = station_draws(len(works), n, rng, mode)
    return [Task(i, int(i // frequency), pickups[pi[i]], works[wi[i]]) for i in range(n)]


def retime(tasks: Sequence[Task], frequency: float) -> list[Task]:
    return [Task(i, int(i // frequency), t.pickup, t.work, t.priority) for i, t in enumerate(tasks)]
