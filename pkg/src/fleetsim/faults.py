"""Motion delay and communication failure processes.

Randomness is consumed in a fixed order each tick: one draw per currently
failed robot (recovery, id order), one draw to pick the newly failed robot,
then one draw per active robot (delay, id order).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class FaultParams:
    f_m: float = 0.0
    f_c: float = 1.0
    seed: int = 0
    comm_failures: bool = True
    exact_count: bool = False  # draw exactly round(f_m * n) delays instead of Bernoulli

    def __post_init__(self):
        for name in ("f_m", "f_c"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


# (f_m, f_c) as published; level 2 breaks the otherwise increasing f_m sequence
PRESETS: dict[str, tuple[float, float]] = {
    "level1": (0.01, 0.30),
    "level2": (0.05, 0.25),
    "level3": (0.02, 0.20),
    "level4": (0.025, 0.15),
    "level5": (0.03, 0.10),
}


def preset(name: str, seed: int = 0) -> FaultParams:
    f_m, f_c = PRESETS[name]
    return FaultParams(f_m=f_m, f_c=f_c, seed=seed)


FAULT_FREE = FaultParams(f_m=0.0, f_c=1.0, comm_failures=False)


def sample_motion_delays(
    active_robots: Sequence[int], f_m: float, rng: np.random.Generator, exact_count: bool = False
) -> set[int]:
    ids = sorted(active_robots)
    if not ids or f_m <= 0.0:
        return set()
    if exact_count:
        k = int(round(f_m * len(ids)))
        return {ids[i] for i in rng.choice(len(ids), size=k, replace=False)} if k else set()
    draws = rng.random(len(ids))
    return {r for r, u in zip(ids, draws) if u < f_m}


def step_comm_failures(
    robots: Iterable[int], failed: Iterable[int], f_c: float, rng: np.random.Generator
) -> tuple[int | None, set[int]]:
    """One new failure among normal robots plus independent recoveries.

    Robots recovering this tick are not eligible to fail again in the same tick.
    """
    failed_ids = sorted(failed)
    recovered = set()
    if failed_ids:
        draws = rng.random(len(failed_ids))
        recovered = {r for r, u in zip(failed_ids, draws) if u < f_c}
    failed_set = set(failed_ids)
    normal = sorted(r for r in robots if r not in failed_set)
    newly = None
    if normal:
        newly = normal[int(rng.integers(len(normal)))]
    return newly, recovered


class FaultInjector:
    """Owns the fault random stream of one run."""

    def __init__(self, params: FaultParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng

    def comm_step(self, robots: Iterable[int], failed: Iterable[int]) -> tuple[int | None, set[int]]:
        if not self.params.comm_failures:
            return None, set()
        return step_comm_failures(robots, failed, self.params.f_c, self.rng)

    def delays(self, active_robots: Sequence[int]) -> set[int]:
        return sample_motion_delays(active_robots, self.params.f_m, self.rng, self.params.exact_count)
