import io
import math

import numpy as np
import pytest

from fleetsim import engine, mapgen
from fleetsim.engine import InvariantViolation, MetricsReport, Mode, SimConfig, Simulation
from fleetsim.faults import preset
from fleetsim.tasks import Task, TaskStatus, generate_tasks
from fleetsim.worldmap import parse_map, validate_partition, validate_well_formed

from oracles import bfs_station_free, grid_text, read_trace, trace_conflicts

# single sector, 10 x 10, one street along row 1
SQUARE = ["R##P####W#", ".........."] + ["#" * 10] * 8

# two sectors joined by one crossing between x=4 and x=5
TWO = ["RPWPW#PWPW", "..........", "#RP##WP#R#"]
TWO_SECTORS = ["0000011111"] * 3
TWO_LEGS = [((6, 0), (2, 0)), ((1, 0), (9, 0)), ((8, 0), (4, 0)), ((2, 2), (5, 2)), ((6, 2), (7, 0))]


def test_empty_world_only_advances_the_clock():
    m = parse_map(grid_text(SQUARE))
    sim = Simulation(m, [], 0)
    for _ in range(3):
        sim.tick()
    assert sim.tick_no == 3
    assert sim.robots == [] and sim.tasks == []
    rep = sim.report()
    assert rep.makespan == 0 and rep.tasks_done == 0 and rep.complete
    assert math.isnan(rep.ave_task_waiting_time) and math.isnan(rep.ave_task_finish_time)


def test_zero_task_run_stops_at_once():
    m = parse_map(grid_text(SQUARE))
    rep = Simulation(m, [], 1, starts=[(0, 0)]).run()
    assert rep.ticks == 0 and rep.makespan == 0
    assert math.isnan(rep.ave_task_finish_time)


def test_carry_time_is_the_road_distance():
    m = parse_map(grid_text(SQUARE))
    task = Task(0, 0, (3, 0), (8, 0))
    sim = Simulation(m, [task], 1, starts=[(0, 0)])
    sim.run()
    done = sim.tasks[0]
    assert done.finish_time - done.pickup_time == bfs_station_free(SQUARE, (3, 0), (8, 0)) == 7
    assert done.pickup_time == bfs_station_free(SQUARE, (0, 0), (3, 0)) - 1


def hand_schedule(rows, start, legs):
    """One robot doing the legs in order: moves start on the assignment tick."""
    pos, a, out = start, 0, []
    for p, w in legs:
        b = a + bfs_station_free(rows, pos, p) - 1
        f = b + bfs_station_free(rows, p, w)
        out.append((a, b, f))
        a, pos = f + 1, w
    return out


def test_five_tasks_on_two_sectors_match_hand_simulation():
    m = parse_map(grid_text(TWO, TWO_SECTORS))
    assert len(m.sectors) == 2
    assert validate_partition(m).ok and validate_well_formed(m, 1).ok
    tasks = [Task(i, 0, p, w) for i, (p, w) in enumerate(TWO_LEGS)]
    sim = Simulation(m, tasks, 1, starts=[(0, 0)])
    rep = sim.run()
    expected = hand_schedule(TWO, (0, 0), TWO_LEGS)
    assert [(t.assign_time, t.pickup_time, t.finish_time) for t in sim.tasks] == expected
    assert rep.ave_task_finish_time == pytest.approx(np.mean([f for _, _, f in expected]))
    assert rep.ave_task_waiting_time == pytest.approx(np.mean([b for _, b, _ in expected]))
    assert rep.makespan == expected[-1][2]


def test_robot_returns_home_after_the_last_task():
    m = parse_map(grid_text(SQUARE))
    sim = Simulation(m, [Task(0, 0, (3, 0), (8, 0))], 1, starts=[(0, 0)])
    sim.run()
    for _ in range(30):
        sim.tick()
    r = sim.robots[0]
    assert r.mode is Mode.IDLE and r.cell in m.robot_stations


def busy_run(seed, faults, ticks=None, trace=None):
    m = mapgen.random_small_map(np.random.default_rng(seed))
    tasks = generate_tasks(m, 200, 5.0, np.random.default_rng(seed + 1))
    cfg = SimConfig(faults=faults, seed=seed, tick_cap=ticks)
    sim = Simulation(m, tasks, 50, cfg, trace=trace)
    return sim, sim.run()


def test_same_seed_gives_identical_trace():
    texts = []
    for _ in range(2):
        buf = io.StringIO()
        busy_run(21, preset("level1", 21), trace=buf)
        texts.append(buf.getvalue())
    assert texts[0] == texts[1]
    other = io.StringIO()
    busy_run(22, preset("level1", 22), trace=other)
    assert other.getvalue() != texts[0]


def test_run_invariants_hold():
    buf = io.StringIO()
    sim, rep = busy_run(8, preset("level1", 8), trace=buf)
    assert rep.complete and rep.tasks_done == 200
    ticks = read_trace(buf.getvalue())
    assert len(ticks) == rep.ticks
    assert all(sorted(row) == list(range(50)) for row in ticks.values())
    assert trace_conflicts(ticks) == []
    assert all(t.timestamps_monotone() for t in sim.tasks)
    assert all(t.status is TaskStatus.DONE for t in sim.tasks)
    for r in sim.robots:
        assert r.sector == sim.map.sector_of[r.cell]
        if r.mode is Mode.IDLE:
            assert r.cell in sim.map.robot_stations
    assert rep.max_max_heat >= rep.ave_max_heat >= rep.ave_ave_heat >= 0
    assert all(getattr(rep, c) >= 0 for c in MetricsReport.columns() if c != "complete")
    assert sim.violations == []


def test_average_fault_counts_are_per_tick():
    sim, rep = busy_run(3, preset("level5", 3))
    assert rep.ave_delay == pytest.approx(sim.delay_total / rep.ticks)
    assert rep.ave_lost == pytest.approx(sim.lost_total / rep.ticks)
    assert rep.ave_lost > 0


def test_tick_cap_flags_an_incomplete_run():
    sim, rep = busy_run(5, preset("level1", 5), ticks=20)
    assert rep.ticks == 20
    assert not rep.complete
    assert rep.tasks_pending == 200 - rep.tasks_done > 0


def test_default_tick_cap():
    m = parse_map(grid_text(SQUARE))
    sim = Simulation(m, [Task(0, 0, (3, 0), (8, 0))], 1, starts=[(0, 0)])
    assert sim.tick_cap == 50 * 2


def test_too_many_robots_rejected():
    m = parse_map(grid_text(SQUARE))
    with pytest.raises(ValueError):
        Simulation(m, [], 2)


def test_invariant_violation_dumps_state(monkeypatch):
    m = parse_map(grid_text(SQUARE))

    def teleport(positions, moves, rank, forbidden):
        return {r: (9, 1) for r in positions}

    monkeypatch.setattr(engine, "resolve_moves", teleport)
    sim = Simulation(m, [Task(0, 0, (3, 0), (8, 0))], 1, starts=[(0, 0)])
    with pytest.raises(InvariantViolation) as err:
        sim.run()
    assert "jumped" in str(err.value)
    assert "(0, 0)" in err.value.dump
