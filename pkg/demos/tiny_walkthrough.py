"""Run the tiny demo scenario and follow a few tasks through their lifecycle.

    python demos/tiny_walkthrough.py

The tiny map is a 6 x 21 strip cut into sectors. Eight robots serve twenty
tasks under the level1 uncertainty preset, so a handful of robots are always
out of contact and their corridors are closed off while they drift.
"""
from pathlib import Path

from fleetsim import Simulation, load_scenario

HERE = Path(__file__).parent


def main():
    sc = load_scenario(HERE / "tiny" / "scenario.txt")
    wmap = sc.load_map()
    sim = Simulation(wmap, sc.load_tasks(), sc.robots, sc.config())
    print(f"{wmap.width}x{wmap.height} map with {len(wmap.sectors)} sectors, {sc.robots} robots")

    rep = sim.run()
    print(f"finished {rep.tasks_done} tasks in {rep.ticks} ticks (makespan {rep.makespan})")
    print(f"on average {rep.ave_lost:.2f} robots were out of contact and {rep.ave_delay:.3f} delayed per tick")

    print("\n task  published  assigned  picked up  finished  robot")
    for t in sim.tasks[:6]:
        print(f"{t.id:5d} {t.publish_time:10d} {t.assign_time:9d} {t.pickup_time:10d} {t.finish_time:9d} {t.robot:6d}")

    print(f"\n{len(sim.closure_log)} communication failures; the first three:")
    for rec in sim.closure_log[:3]:
        print(f"  robot {rec.owner} at tick {rec.start}: closed {sorted(rec.cells)} until tick {rec.end}")


if __name__ == "__main__":
    main()
