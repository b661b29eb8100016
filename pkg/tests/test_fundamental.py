"""Mean-reverting fundamental: fixed points, decay, long-run statistics."""

import numpy as np
import pytest

from bubblesim.fundamental import FundamentalOracle, OUParams, generate_path
from bubblesim.kernel import NS_PER_SEC


def rng(seed=0):
    return np.random.default_rng(seed)


def test_zero_vol_at_mean_is_constant():
    params = OUParams(mu=100_000, kappa=1e-4, sigma=0.0, r0=100_000)
    path = generate_path(params, rng(), 1000)
    assert np.all(path.values == 100_000.0)


def test_zero_vol_decays_geometrically():
    params = OUParams(mu=100_000, kappa=1e-3, sigma=0.0, r0=101_000)
    path = generate_path(params, rng(), 500)
    gaps = path.values - 100_000.0
    factor = 1.0 - params.kappa * params.dt_s
    for i in range(1, 200):
        assert gaps[i] == pytest.approx(gaps[i - 1] * factor, rel=1e-12)
    assert np.all(np.diff(gaps) < 0)


@pytest.mark.slow
def test_long_run_mean_and_variance():
    # stationary variance sigma^2 / (2 kappa), mean mu, over 1e6 steps
    params = OUParams(mu=100_000, kappa=1e-3, sigma=5.0, r0=100_000)
    path = generate_path(params, rng(123), 1_000_000)
    target_var = params.stationary_var()
    burn = 50_000
    values = path.values[burn:]
    assert abs(values.mean() - params.mu) / params.mu < 0.01
    assert abs(values.var() - target_var) / target_var < 0.10


def test_same_seed_same_path():
    params = OUParams(mu=100_000, kappa=1e-4, sigma=2.0, r0=100_000)
    a = generate_path(params, rng(7), 5000)
    b = generate_path(params, rng(7), 5000)
    assert np.array_equal(a.values, b.values)


def test_clamped_at_one_cent():
    params = OUParams(mu=5, kappa=1e-6, sigma=50.0, r0=5)
    path = generate_path(params, rng(2), 10_000)
    assert path.values.min() >= 1.0


def test_step_lookup():
    params = OUParams(mu=100, kappa=1e-4, sigma=0.0, r0=100, dt_s=2.0)
    path = generate_path(params, rng(), 10)
    assert path.value_at(0) == 100.0
    assert path.value_at(3 * NS_PER_SEC) == path.values[1]
    assert path.value_at(10**15) == path.values[-1]     # queries clamp to the end


def test_observe_exact_when_noise_zero():
    params = OUParams(mu=100_000, kappa=1e-4, sigma=1.0, r0=100_000)
    path = generate_path(params, rng(3), 100)
    oracle = FundamentalOracle(path, obs_std=0.0)
    t = 50 * NS_PER_SEC
    assert oracle.observe(t, rng(9)) == round(path.value_at(t))


def test_observation_noise_clt_bound():
    params = OUParams(mu=100_000, kappa=1e-4, sigma=0.0, r0=100_000)
    path = generate_path(params, rng(), 100)
    obs_std = 40.0
    oracle = FundamentalOracle(path, obs_std)
    g = rng(11)
    t = 60 * NS_PER_SEC
    n = 10_000
    obs = np.array([oracle.observe(t, g) for _ in range(n)])
    # sample mean within 3 standard errors of the true value
    assert abs(obs.mean() - path.value_at(t)) < 3 * obs_std / np.sqrt(n)


def test_independent_streams_draw_different_noise():
    params = OUParams(mu=100_000, kappa=1e-4, sigma=0.0, r0=100_000)
    path = generate_path(params, rng(), 100)
    oracle = FundamentalOracle(path, obs_std=100.0)
    t = 10 * NS_PER_SEC
    a = [oracle.observe(t, rng(1)) for _ in range(5)]
    b = [oracle.observe(t, rng(2)) for _ in range(5)]
    assert a != b


def test_observation_clamped_positive():
    params = OUParams(mu=5, kappa=1e-4, sigma=0.0, r0=5)
    path = generate_path(params, rng(), 100)
    oracle = FundamentalOracle(path, obs_std=1000.0)
    g = rng(4)
    values = [oracle.observe(0, g) for _ in range(200)]
    assert min(values) >= 1


def test_param_validation():
    with pytest.raises(ValueError):
        OUParams(mu=1, kappa=0.0, sigma=1.0, r0=1).validate()
    with pytest.raises(ValueError):
        OUParams(mu=1, kappa=1.0, sigma=-1.0, r0=1).validate()
    with pytest.raises(ValueError):
        OUParams(mu=1, kappa=1.0, sigma=1.0, r0=1, dt_s=0.0).validate()
