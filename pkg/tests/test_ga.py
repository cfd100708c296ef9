import numpy as np
import pytest

from bearing_reg.errors import InvalidArgumentError
from bearing_reg.ga import GASettings, run_ga


def sphere(shift):
    return lambda P: np.sum((P - shift) ** 2, axis=1)


def rastrigin(P, scale=0.02):
    x = P / scale * 5.12
    return 10 * P.shape[1] + np.sum(x**2 - 10 * np.cos(2 * np.pi * x), axis=1)


@pytest.mark.parametrize("dims", [1, 3, 4])
def test_sphere_minimum(dims):
    shift = np.linspace(-0.03, 0.04, dims)
    s = GASettings(generations=200, seed=3)
    res = run_ga(sphere(shift), dims, s, np.random.default_rng(s.seed))
    np.testing.assert_allclose(res.best, shift, atol=2e-3)


def test_rastrigin_global_basin():
    s = GASettings(generations=300, population_size=80, seed=1)
    res = run_ga(rastrigin, 2, s, np.random.default_rng(1))
    assert np.all(np.abs(res.best) < 0.002)


def test_bounds_respected():
    # minimum outside the box: the GA ends on the boundary
    s = GASettings(generations=100, seed=0)
    res = run_ga(sphere(np.array([0.2, -0.2])), 2, s, np.random.default_rng(0))
    assert np.all(res.population >= s.lower_bound) and np.all(res.population <= s.upper_bound)
    np.testing.assert_allclose(res.best, [0.05, -0.05], atol=1e-3)


def test_deterministic_for_seed():
    s = GASettings(generations=40, seed=9)
    a = run_ga(rastrigin, 3, s, np.random.default_rng(9))
    b = run_ga(rastrigin, 3, s, np.random.default_rng(9))
    assert np.array_equal(a.population, b.population)
    assert a.history == b.history


def test_history_monotone_with_elitism():
    s = GASettings(generations=60, seed=2)
    res = run_ga(rastrigin, 4, s, np.random.default_rng(2))
    assert np.all(np.diff(res.history) <= 0)
    assert res.best_fitness == pytest.approx(res.history[-1])


def test_stall_stop():
    s = GASettings(generations=500, stall_generations=10, tolerance=1e-3, seed=0)
    res = run_ga(lambda P: np.zeros(len(P)), 2, s, np.random.default_rng(0))
    assert res.generations_run == 10


def test_initial_population_is_used():
    s = GASettings(generations=1, seed=0, elite_count=2)
    seed_pop = np.full((60, 2), 0.01)
    res = run_ga(sphere(np.array([0.01, 0.01])), 2, s, np.random.default_rng(0), seed_pop)
    assert res.history[0] == 0.0


def test_nan_fitness_treated_as_worst():
    def f(P):
        out = np.sum(P**2, axis=1)
        out[P[:, 0] > 0] = np.nan
        return out

    s = GASettings(generations=50, seed=0)
    res = run_ga(f, 2, s, np.random.default_rng(0))
    assert np.isfinite(res.best_fitness)
    assert res.best[0] <= 0


@pytest.mark.parametrize(
    "kw",
    [
        {"lower_bound": 0.1, "upper_bound": 0.1},
        {"generations": 0},
        {"population_size": 3},
        {"window_size": 0},
        {"elite_count": 60},
        {"tournament_size": 0},
    ],
)
def test_settings_validation(kw):
    with pytest.raises(InvalidArgumentError):
        GASettings(**kw)


def test_realtime_settings():
    s = GASettings.realtime(seed=4)
    assert (s.generations, s.window_size, s.seed) == (50, 10, 4)
