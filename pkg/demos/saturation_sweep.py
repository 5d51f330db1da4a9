"""A shortened task-frequency sweep on the quarter-scale map.

    python demos/saturation_sweep.py [n_tasks]

With few tasks per tick the fleet waits for work and the makespan is set by
the publishing rate. Past a few tasks per tick the fleet is the bottleneck:
the makespan stops improving and tasks pile up, so the finish time grows
until it levels out too. The acceptance suite runs the full version with
750 tasks and three trials per frequency.
"""
import sys

import numpy as np

from fleetsim import SimConfig, Simulation, generate_tasks, preset
from fleetsim import mapgen
from fleetsim.tasks import retime


def main(n_tasks=300):
    wmap = mapgen.quarter_map()
    base = generate_tasks(wmap, n_tasks, 1.0, np.random.default_rng(100))
    print("freq  makespan  AveTaskWaitingTime  AveTaskFinishTime  AveCalTime")
    for f in (1, 2, 4, 8):
        rep = Simulation(wmap, retime(base, float(f)), 250, SimConfig(faults=preset("level1", 0))).run()
        print(f"{f:4d} {rep.makespan:9d} {rep.ave_task_waiting_time:19.1f} "
              f"{rep.ave_task_finish_time:18.1f} {rep.ave_cal_time * 1000:8.1f} ms")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 300)
