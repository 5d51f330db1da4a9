"""Command-line entry points: validate, run, sweep and gen-map.

Exit status is 0 on success, 1 on a domain failure (a map that fails
validation, an incomplete run) and 2 on usage or parse errors.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import mapgen
from .engine import MetricsReport, Simulation
from .faults import PRESETS
from .render import render_snapshot
from .scenario import Scenario, ScenarioError, load_scenario, save_scenario
from .tasks import TaskFileError, generate_tasks, save_tasks, write_report
from .worldmap import MapError, load_map, save_map, validate_partition, validate_well_formed

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

VARIABLES = ("TaskFrequency", "UncertaintyLevel")


class UsageError(Exception):
    pass


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return "" if v is None else str(v)


STD_COLUMNS = [c + "_std" for c in MetricsReport.columns()]


def summary_row(reports: Sequence[MetricsReport]) -> list:
    """Column means followed by population stddevs, NaN entries skipped."""
    mean, std = [], []
    for c in MetricsReport.columns():
        vals = np.array([float(getattr(r, c)) for r in reports], dtype=float)
        vals = vals[~np.isnan(vals)]
        mean.append(float(vals.mean()) if vals.size else math.nan)
        std.append(float(vals.std()) if vals.size else math.nan)
    return mean + std


# ------------------------------------------------------------------- validate


def cmd_validate(args) -> int:
    try:
        wmap = load_map(args.map)
    except OSError as exc:
        raise UsageError(f"cannot read {args.map}: {exc}")
    n = args.robots if args.robots is not None else len(wmap.robot_stations)
    reports = [validate_well_formed(wmap, n), validate_partition(wmap)]
    for rep in reports:
        for line in rep.lines():
            print(line)
    ok = all(r.ok for r in reports)
    print("valid" if ok else "invalid")
    return EXIT_OK if ok else EXIT_FAIL


# ------------------------------------------------------------------------ run


def simulate(sc: Scenario, out: Path | None, tag: str = "", trace: bool = True,
             render_every: int | None = None) -> MetricsReport:
    wmap = sc.load_map()
    tasks = sc.load_tasks()
    trace_fh = heat_fh = None
    try:
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            if trace:
                trace_fh = open(out / f"trace{tag}.csv", "w", newline="", encoding="utf-8")
            heat_fh = open(out / f"heat{tag}.csv", "w", newline="", encoding="utf-8")
        sim = Simulation(wmap, tasks, sc.robots, sc.config(), trace=trace_fh, heat=heat_fh)
        if render_every:
            sim.keep_snapshots_every = render_every
        rep = sim.run()
    finally:
        for fh in (trace_fh, heat_fh):
            if fh is not None:
                fh.close()
    if out is not None:
        with open(out / f"tasks{tag}.csv", "w", newline="", encoding="utf-8") as fh:
            write_report(fh, sim.tasks)
        for state in sim.snapshots:
            render_snapshot(wmap, state, out / f"heat{tag}_{state.tick:06d}.pgm")
    return rep


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    if args.tick_cap is not None:
        sc = replace(sc, tick_cap=args.tick_cap)
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if args.render_every is not None and args.render_every < 1:
        raise UsageError("--render-every must be positive")
    out = Path(args.out)
    reports = []
    for k in range(args.trials):
        tsc = replace(sc, seed=sc.seed + k)
        tag = "" if args.trials == 1 else f"_{k}"
        rep = simulate(tsc, out, tag, trace=not args.no_trace, render_every=args.render_every)
        reports.append((k, tsc.seed, rep))
        status = "complete" if rep.complete else f"incomplete ({rep.tasks_pending} pending)"
        print(f"trial {k} seed {tsc.seed}: makespan {rep.makespan}, {status}")
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "seed"] + MetricsReport.columns() + STD_COLUMNS)
        blank = [""] * len(STD_COLUMNS)
        for k, seed, rep in reports:
            w.writerow([k, seed] + [fmt(v) for v in rep.row()] + blank)
        if args.trials > 1:
            w.writerow(["summary", ""] + [fmt(v) for v in summary_row([r for _, _, r in reports])])
    return EXIT_OK if all(r.complete for _, _, r in reports) else EXIT_FAIL


# ---------------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    trials: int
    base: Scenario

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise UsageError(f"variable must be one of {', '.join(VARIABLES)}")
        if not self.values:
            raise UsageError("sweep needs at least one value")
        if self.trials < 1:
            raise UsageError("trials must be at least 1")


def sub_seed(seed: int, value, trial: int) -> int:
    """Stable per-run seed; ``hash()`` is salted per process so crc32 is used."""
    ss = np.random.SeedSequence([seed, zlib.crc32(str(value).encode()), trial])
    return int(ss.generate_state(1)[0])


def parse_values(variable: str, raw: str) -> tuple:
    items = [v.strip() for v in raw.split(",") if v.strip()]
    if not items:
        raise UsageError("empty values list")
    if variable == "TaskFrequency":
        try:
            vals = tuple(float(v) for v in items)
        except ValueError:
            raise UsageError(f"bad frequency list {raw!r}")
        if any(v <= 0 for v in vals):
            raise UsageError("task frequencies must be positive")
        return vals
    unknown = [v for v in items if v not in PRESETS]
    if unknown:
        raise UsageError(f"unknown uncertainty level(s): {', '.join(unknown)}")
    return tuple(items)


def sweep_scenario(spec: SweepSpec, value, trial: int) -> Scenario:
    sc = replace(spec.base, seed=sub_seed(spec.base.seed, value, trial))
    if spec.variable == "TaskFrequency":
        return replace(sc, task_frequency=float(value))
    return sc.with_preset(str(value))


def _sweep_job(args) -> tuple[MetricsReport | None, str]:
    sc, = args
    try:
        return simulate(sc, None), ""
    except Exception as exc:  # recorded per row, the sweep continues
        return None, f"{type(exc).__name__}: {exc}"


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[list]:
    plan = [(v, k, sweep_scenario(spec, v, k)) for v in spec.values for k in range(spec.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_sweep_job, [(sc,) for _, _, sc in plan]))
    else:
        results = [_sweep_job((sc,)) for _, _, sc in plan]
    rows = []
    for v in spec.values:
        reps = []
        for (pv, k, sc), (rep, err) in zip(plan, results):
            if pv != v:
                continue
            label = [spec.variable, fmt(v), k, sc.seed, fmt(sc.f_m), fmt(sc.f_c)]
            blank = [""] * len(STD_COLUMNS)
            if rep is None:
                rows.append(label + [""] * len(MetricsReport.columns()) + blank + [err])
                continue
            if not rep.complete:
                err = f"incomplete: {rep.tasks_pending} pending"
            reps.append(rep)
            rows.append(label + [fmt(x) for x in rep.row()] + blank + [err])
        if reps:
            sc0 = sweep_scenario(spec, v, 0)
            label = [spec.variable, fmt(v), "summary", "", fmt(sc0.f_m), fmt(sc0.f_c)]
            rows.append(label + [fmt(x) for x in summary_row(reps)] + [""])
    return rows


SWEEP_COLUMNS = ["variable", "value", "trial", "seed", "f_m", "f_c"] + MetricsReport.columns() + STD_COLUMNS + ["error"]


def cmd_sweep(args) -> int:
    variable = args.variable
    if variable not in VARIABLES:
        raise UsageError(f"--variable must be one of {', '.join(VARIABLES)}")
    values = parse_values(variable, args.values)
    base = load_scenario(args.scenario)
    spec = SweepSpec(variable, values, args.trials, base)
    rows = run_sweep(spec, args.jobs)
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out != "-" else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    failed = [r for r in rows if r[-1]]
    for r in failed:
        print(f"{r[0]}={r[1]} trial {r[2]}: {r[-1]}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# -------------------------------------------------------------------- gen-map

SCALES = ("reference", "quarter")
SCALE_DEFAULTS = {"reference": (1008, 3000, 5.0), "quarter": (250, 750, 2.0)}


def cmd_gen_map(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wmap = mapgen.reference_map(args.alpha) if args.scale == "reference" else mapgen.quarter_map(args.alpha)
    robots, n_tasks, freq = SCALE_DEFAULTS[args.scale]
    robots = args.robots if args.robots is not None else robots
    n_tasks = args.tasks if args.tasks is not None else n_tasks
    freq = args.frequency if args.frequency is not None else freq
    if freq <= 0 or n_tasks < 0 or robots < 0:
        raise UsageError("frequency must be positive; robots and tasks non-negative")
    save_map(wmap, out / "map.txt")
    tasks = generate_tasks(wmap, n_tasks, freq, np.random.default_rng(args.seed))
    save_tasks(out / "tasks.csv", tasks)
    sc = Scenario(out / "map.txt", out / "tasks.csv", robots, seed=args.seed).with_preset(args.preset)
    save_scenario(sc, out / "scenario.txt")
    print(f"{wmap.width}x{wmap.height} map, {len(wmap.sectors)} sectors, "
          f"{len(wmap.robot_stations)}/{len(wmap.pickup_stations)}/{len(wmap.working_stations)} "
          f"robot/pickup/working stations, {n_tasks} tasks -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fleetsim", description="Lifelong warehouse fleet simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a map against the well-formedness and partition criteria")
    v.add_argument("map", help="map file")
    v.add_argument("--robots", type=int, help="fleet size for the station-count check (default: one per robot station)")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="run one scenario, writing metrics.csv, trace.csv, heat.csv and tasks.csv")
    r.add_argument("scenario", help="scenario file (key = value lines)")
    r.add_argument("-o", "--out", default=".", help="output directory (default: current directory)")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--trials", type=int, default=1,
                   help="repeat N times with seeds seed..seed+N-1 and append a mean/std summary row")
    r.add_argument("--no-trace", action="store_true", help="do not write trace.csv")
    r.add_argument("--render-every", type=int, metavar="T", help="write a heat-map PGM every T ticks")
    r.add_argument("--tick-cap", type=int, help="override the tick cap")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep task frequency or uncertainty level, one CSV row per run")
    s.add_argument("scenario", help="base scenario file")
    s.add_argument("--variable", required=True, choices=VARIABLES)
    s.add_argument("--values", required=True,
                   help="comma-separated frequencies (tasks per tick) or preset names level1..level5")
    s.add_argument("--trials", type=int, default=3, help="runs per value (default 3)")
    s.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    s.add_argument("-o", "--out", default="-", help="output CSV (default: stdout)")
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gen-map", help="write a parametric grid map, a task list and a scenario")
    g.add_argument("out", help="output directory")
    g.add_argument("--scale", choices=SCALES, default="reference",
                   help="reference: 160x100 with 1008/3528/432 stations; quarter: 73x53 with 252/672/672")
    g.add_argument("--robots", type=int, help="fleet size (default 1008 or 250)")
    g.add_argument("--tasks", type=int, help="task count (default 3000 or 750)")
    g.add_argument("--frequency", type=float, help="tasks published per tick (default 5 or 2)")
    g.add_argument("--preset", choices=sorted(PRESETS), default="level1", help="uncertainty preset")
    g.add_argument("--seed", type=int, default=0, help="seed for task generation and the scenario")
    g.add_argument("--alpha", type=float, default=0.5, help="sector capacity factor")
    g.set_defaults(func=cmd_gen_map)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ScenarioError, TaskFileError, MapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
