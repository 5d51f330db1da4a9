"""Scenario files: a ``key = value`` header pointing at a map and a task list.

Paths are resolved relative to the scenario file. Unknown keys are an
error so that typos do not silently fall back to defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .engine import SimConfig
from .faults import PRESETS, FaultParams
from .tasks import Task, load_tasks, retime
from .traffic import WeightParams
from .worldmap import WarehouseMap, load_map


class ScenarioError(ValueError):
    pass


_INT_KEYS = {"robots", "K", "seed", "tick_cap", "cbs_budget"}
_FLOAT_KEYS = {"k_h", "k_l", "f_m", "f_c", "task_frequency"}
_STR_KEYS = {"map", "task_file", "preset"}
KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


@dataclass(frozen=True)
class Scenario:
    map_path: Path
    task_path: Path
    robots: int
    K: int = 3
    k_h: float = 10.0
    k_l: float = 50.0
    f_m: float = 0.0
    f_c: float | None = None  # None disables communication failures
    seed: int = 0
    tick_cap: int | None = None
    cbs_budget: int = 0
    task_frequency: float | None = None  # retime the task file to this rate
    preset: str | None = None

    def with_preset(self, name: str) -> "Scenario":
        if name not in PRESETS:
            raise ScenarioError(f"unknown preset {name!r}")
        f_m, f_c = PRESETS[name]
        return replace(self, preset=name, f_m=f_m, f_c=f_c)

    def fault_params(self) -> FaultParams:
        if self.f_c is None:
            return FaultParams(f_m=self.f_m, seed=self.seed, comm_failures=False)
        return FaultParams(f_m=self.f_m, f_c=self.f_c, seed=self.seed)

    def config(self) -> SimConfig:
        return SimConfig(
            K=self.K,
            weights=WeightParams(self.k_h, self.k_l),
            faults=self.fault_params(),
            seed=self.seed,
            tick_cap=self.tick_cap,
            cbs_budget=self.cbs_budget,
        )

    def load_map(self) -> WarehouseMap:
        return load_map(self.map_path)

    def load_tasks(self) -> list[Task]:
        tasks = load_tasks(self.task_path)
        return retime(tasks, self.task_frequency) if self.task_frequency else tasks


def parse_scenario(text: str, base: Path | str = ".") -> Scenario:
    base = Path(base)
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            key, sep, val = line.partition(":")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        if key not in KEYS:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            else:
                values[key] = val
        except ValueError:
            raise ScenarioError(f"line {lineno}: bad value for {key}: {val!r}") from None
    for req in ("map", "task_file", "robots"):
        if req not in values:
            raise ScenarioError(f"missing required key {req!r}")
    preset = values.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ScenarioError(f"unknown preset {preset!r}")
        # explicit f_m / f_c keys win over the preset
        values.setdefault("f_m", PRESETS[preset][0])
        values.setdefault("f_c", PRESETS[preset][1])
    sc = Scenario(
        map_path=base / str(values.pop("map")),
        task_path=base / str(values.pop("task_file")),
        **values,
    )
    if sc.robots < 0 or sc.K < 0 or sc.cbs_budget < 0:
        raise ScenarioError("robots, K and cbs_budget must be non-negative")
    try:
        sc.fault_params()
        WeightParams(sc.k_h, sc.k_l)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    return parse_scenario(text, path.parent)


def format_scenario(sc: Scenario, base: Path | str | None = None) -> str:
    def rel(p: Path) -> str:
        if base is None:
            return str(p)
        try:
            return str(Path(p).relative_to(base))
        except ValueError:
            return str(p)

    lines = [f"map = {rel(sc.map_path)}", f"task_file = {rel(sc.task_path)}", f"robots = {sc.robots}",
             f"K = {sc.K}", f"k_h = {sc.k_h!r}", f"k_l = {sc.k_l!r}", f"f_m = {sc.f_m!r}"]
    if sc.f_c is not None:
        lines.append(f"f_c = {sc.f_c!r}")
    lines.append(f"seed = {sc.seed}")
    if sc.tick_cap is not None:
        lines.append(f"tick_cap = {sc.tick_cap}")
    lines.append(f"cbs_budget = {sc.cbs_budget}")
    if sc.task_frequency is not None:
        lines.append(f"task_frequency = {sc.task_frequency!r}")
    if sc.preset is not None:
        lines.append(f"preset = {sc.preset}")
    return "\n".join(lines) + "\n"


def save_scenario(sc: Scenario, path) -> None:
    path = Path(path)
    path.write_text(format_scenario(sc, path.parent), encoding="utf-8")
