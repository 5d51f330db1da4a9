import numpy as np
import pytest

from fleetsim.faults import (
    FAULT_FREE,
    PRESETS,
    FaultInjector,
    FaultParams,
    preset,
    sample_motion_delays,
    step_comm_failures,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def test_no_delays_at_zero_rate():
    r = rng()
    for _ in range(50):
        assert sample_motion_delays(range(100), 0.0, r) == set()


def test_everyone_delayed_at_rate_one():
    assert sample_motion_delays([4, 2, 9], 1.0, rng()) == {2, 4, 9}


def test_level_one_delay_rate_over_many_ticks():
    r = rng(7)
    counts = [len(sample_motion_delays(range(1008), 0.01, r)) for _ in range(10000)]
    assert abs(np.mean(counts) - 10.08) <= 1.0


def test_exact_count_variant():
    r = rng(1)
    for _ in range(20):
        assert len(sample_motion_delays(range(200), 0.05, r, exact_count=True)) == 10


def test_no_new_failure_when_everyone_is_down():
    newly, recovered = step_comm_failures([0, 1, 2], [0, 1, 2], 0.0, rng())
    assert newly is None and recovered == set()


def test_certain_recovery():
    newly, recovered = step_comm_failures(range(10), [3, 5], 1.0, rng())
    assert recovered == {3, 5}
    assert newly not in (3, 5)


def test_one_new_failure_per_tick_among_normal_robots():
    r = rng(3)
    failed: set[int] = set()
    for _ in range(500):
        newly, recovered = step_comm_failures(range(20), failed, 0.3, r)
        assert newly is not None and newly not in failed
        assert newly not in recovered
        failed = (failed - recovered) | {newly}


def test_steady_state_failed_count():
    def run(seed, ticks=40000):
        """independent balance simulation: +1 per tick, each failed leaves with p=0.3"""
        g = rng(seed)
        n, total = 0, 0
        for _ in range(ticks):
            n = n - int((g.random(n) < 0.3).sum()) + 1
            total += n
        return total / ticks

    r = rng(11)
    failed: set[int] = set()
    sizes = []
    for _ in range(40000):
        newly, recovered = step_comm_failures(range(1008), failed, 0.3, r)
        failed = (failed - recovered) | {newly}
        sizes.append(len(failed))
    mean = float(np.mean(sizes))
    assert mean == pytest.approx(1 / 0.3, abs=0.05)
    assert mean == pytest.approx(run(12), abs=0.08)


def test_preset_table():
    assert PRESETS == {
        "level1": (0.01, 0.30),
        "level2": (0.05, 0.25),
        "level3": (0.02, 0.20),
        "level4": (0.025, 0.15),
        "level5": (0.03, 0.10),
    }
    p = preset("level4", seed=9)
    assert (p.f_m, p.f_c, p.seed, p.comm_failures) == (0.025, 0.15, 9, True)


@pytest.mark.parametrize("field, value", [("f_m", -0.1), ("f_m", 1.5), ("f_c", 2.0)])
def test_probabilities_must_be_in_range(field, value):
    with pytest.raises(ValueError):
        FaultParams(**{field: value})


def test_fault_free_injector_draws_nothing():
    r = rng()
    before = r.bit_generator.state
    inj = FaultInjector(FAULT_FREE, r)
    assert inj.comm_step(range(10), []) == (None, set())
    assert inj.delays(list(range(10))) == set()
    assert r.bit_generator.state == before


def test_same_seed_same_stream():
    def stream(seed):
        inj = FaultInjector(preset("level2"), rng(seed))
        out, failed = [], set()
        for t in range(300):
            newly, rec = inj.comm_step(range(30), failed)
            failed = (failed - rec) | ({newly} if newly is not None else set())
            out.append((newly, tuple(sorted(rec)), tuple(sorted(inj.delays(list(range(t % 30)))))))
        return out

    assert stream(5) == stream(5)
    assert stream(5) != stream(6)
