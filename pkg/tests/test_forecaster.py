import numpy as np
import pytest

from swarmdiff.diffusion import FragmentSwarmStats
from swarmdiff.forecast import (
    FragmentHistory,
    SeriesForecaster,
    SwarmForecaster,
    altered_permeability,
    blend,
    clamp_stats,
    forecast_mse,
    persistence_forecast,
)
from swarmdiff.forecast.synthetic import linear_decay, seasonal_series


def test_seasonal_series_is_seeded():
    a = seasonal_series(100, seed=3)
    np.testing.assert_array_equal(a, seasonal_series(100, seed=3))
    assert not np.array_equal(a, seasonal_series(100, seed=4))


def test_persistence_mse_on_pure_sinusoid():
    x = np.sin(2 * np.pi * np.arange(240) / 24)
    # six steps is a quarter period: x(t + 6) - x(t) has mean square 1
    assert forecast_mse(x, persistence_forecast(x), 6) == pytest.approx(1.0, rel=0.05)


def test_forecaster_beats_persistence_on_seasonal_series():
    x = seasonal_series(480, seed=1)
    f = SeriesForecaster(levels=3, hidden=12, horizon=6, seed=1)
    f.fit(x[:360], epochs=150)
    pred = f.predict_all(x)
    assert np.isnan(pred[:7]).all()
    mse = forecast_mse(x, pred, 6, 360)
    assert mse < forecast_mse(x, persistence_forecast(x), 6, 360)
    assert mse < np.var(x[360:])


def test_forecaster_rejects_short_series():
    with pytest.raises(ValueError):
        SeriesForecaster(levels=4, horizon=6).fit(np.ones(10), epochs=1)
    with pytest.raises(ValueError):
        SeriesForecaster(target_mode="ratio")
    with pytest.raises(RuntimeError):
        SeriesForecaster().predict_all(np.ones(40))


def test_altered_permeability_when_seeders_drop():
    now = FragmentSwarmStats(0, 10, 5, 0.2)
    later = FragmentSwarmStats(0, 10, 1, 0.2)
    assert altered_permeability(now) == pytest.approx(10 / 6)
    assert altered_permeability(later) == pytest.approx(10 / 2.8)
    assert altered_permeability(later) > altered_permeability(now)


def test_clamp_stats():
    s = clamp_stats(2, -3.0, 5.0, -0.1)
    assert (s.users_total, s.seeders, s.mean_share_ratio) == (0.0, 0.0, 0.0)
    s = clamp_stats(2, 4.0, 9.0, 0.4)
    assert s.seeders == 4.0


def test_blend_modes():
    now = FragmentSwarmStats(1, 10, 6, 0.4)
    later = FragmentSwarmStats(1, 10, 2, 0.2)
    assert blend(now, later) is later
    mean = blend(now, later, "mean")
    assert (mean.users_total, mean.seeders, mean.mean_share_ratio) == (10, 4, pytest.approx(0.3))
    with pytest.raises(ValueError):
        blend(now, later, "max")


def test_swarm_forecaster_follows_a_decline():
    n = 24
    steady, falling = FragmentHistory(), FragmentHistory()
    seeders = linear_decay(60, start=20, stop=5)
    for s in seeders:
        falling.append(FragmentSwarmStats(0, n, int(round(s)), 0.1))
        steady.append(FragmentSwarmStats(1, n, 4, 0.1))
    f = SwarmForecaster(n, levels=2, hidden=8, horizon=6, seed=0)
    f.fit([falling, steady], epochs=150)
    assert f.fitted
    # users and share ratio never moved, so those heads stay put
    assert f.frozen.tolist() == [True, False, True]
    predicted = f.forecast(0, falling)
    assert predicted.users_total == n
    assert predicted.seeders < falling.seeders[-1]
    assert f.forecast(1, steady).seeders == pytest.approx(4, abs=1.0)


def test_swarm_forecaster_needs_history():
    f = SwarmForecaster(10, levels=2, horizon=3)
    with pytest.raises(RuntimeError):
        f.forecast(0, np.ones((10, 3)))
    with pytest.raises(ValueError):
        f.fit([np.ones((3, 3))], epochs=1)
    f.fit([np.column_stack([np.full(20, 10.0), np.arange(20.0) % 5, np.zeros(20)])], epochs=2)
    assert f.forecast(0, np.ones((2, 3))) is None
