import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from terrain_ipp.cmaes import CmaConfig, default_population_size, maximize


def quad(c):
    return lambda x: -float(np.sum((x - c) ** 2))


def box3(seed=0, **kw):
    return CmaConfig([1.0, 1.0, 1.0], [-10] * 3, [10] * 3, seed=seed, **kw)


@pytest.mark.parametrize("seed", range(10))
def test_quadratic_recovery(seed):
    rng = np.random.default_rng(100 + seed)
    c = rng.uniform(-5, 5, 3)
    res = maximize(quad(c), np.zeros(3), box3(seed))
    assert np.linalg.norm(res.x - c) < 0.1
    assert res.evaluations == 45 * default_population_size(3)


def test_zero_iterations_is_noop():
    res = maximize(quad(np.ones(3)), np.zeros(3), box3(max_iterations=0))
    assert np.array_equal(res.x, np.zeros(3))
    assert res.score == -3.0
    assert res.evaluations == 0


def test_deterministic_per_seed():
    a = maximize(quad(np.array([1.0, 2, 3])), np.zeros(3), box3(7))
    b = maximize(quad(np.array([1.0, 2, 3])), np.zeros(3), box3(7))
    assert np.array_equal(a.x, b.x) and a.score == b.score


def test_bounds_respected_when_optimum_outside():
    cfg = CmaConfig([2.0, 2.0], [0, 0], [1, 1], seed=3)
    res = maximize(quad(np.array([5.0, -5.0])), np.array([0.5, 0.5]), cfg)
    assert np.all(res.x >= 0) and np.all(res.x <= 1)
    np.testing.assert_allclose(res.x, [1.0, 0.0], atol=0.05)


def test_nonfinite_objective_tolerated():
    def f(x):
        if x[0] > 2:
            return math.nan
        if x[1] > 2:
            raise ValueError("bad")
        return -float(np.sum(x**2))

    res = maximize(f, np.full(3, 1.0), box3(1))
    assert np.isfinite(res.score)
    assert np.linalg.norm(res.x) < 0.1


def test_trace_monotone_and_csv(tmp_path):
    trace = []
    maximize(quad(np.array([3.0, -2, 1])), np.zeros(3), box3(2), trace=trace, trace_csv=tmp_path / "t.csv")
    best = [row[1] for row in trace]
    assert len(best) == 45
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 46


def test_config_validation():
    with pytest.raises(ValueError):
        CmaConfig([1.0, 0.0], [0, 0], [1, 1])
    with pytest.raises(ValueError):
        CmaConfig([1.0], [1], [1])
    with pytest.raises(ValueError):
        CmaConfig([1.0], [0], [1], population_size=1)
    with pytest.raises(ValueError):
        maximize(quad(np.zeros(1)), np.array([2.0]), CmaConfig([1.0], [0], [1]))


def test_default_population():
    assert default_population_size(12) == 11
    assert default_population_size(3) == 7


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), x0=st.floats(-1, 1))
def test_best_never_below_start_and_in_bounds(seed, x0):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-3, 3, 4)
    cfg = CmaConfig(rng.uniform(0.5, 4, 4), [-1] * 4, [1] * 4, max_iterations=10, seed=seed)
    start = np.full(4, x0)
    res = maximize(lambda x: -float(np.sum(np.abs(x - c))), start, cfg)
    assert res.score >= -float(np.sum(np.abs(start - c)))
    assert np.all(res.x >= -1) and np.all(res.x <= 1)
