import numpy as np
import pytest

from evqueue.core import Config, DemandScenario, HourlyFlowSeries
from evqueue.demand import (
    ArrivalModel,
    SocSampler,
    arrival_rates,
    battery_grid,
    rate_jitter_factors,
    sample_recharge_fraction,
    truncated_mean,
)

FLAT_1000 = HourlyFlowSeries("L1", (1000.0,) * 24)


def test_rate_arithmetic():
    model = arrival_rates(FLAT_1000, 0.001, DemandScenario.OD2016)
    assert model.hourly_rate == (1.0,) * 24
    model30 = arrival_rates(FLAT_1000, 0.001, DemandScenario.OD30)
    assert model30.hourly_rate == pytest.approx((1.3,) * 24, rel=1e-15)


def test_scaling_contract_od15():
    base = arrival_rates(FLAT_1000, 0.004, DemandScenario.OD2016)
    scaled = arrival_rates(FLAT_1000, 0.004, DemandScenario.OD15)
    for a, b in zip(base.hourly_rate, scaled.hourly_rate):
        assert b == pytest.approx(1.15 * a, rel=1e-15)


def test_linearity_in_evp_and_flow():
    double_flow = HourlyFlowSeries("L1", (2000.0,) * 24)
    r1 = arrival_rates(FLAT_1000, 0.001, DemandScenario.OD2016).hourly_rate
    r2 = arrival_rates(FLAT_1000, 0.002, DemandScenario.OD2016).hourly_rate
    r3 = arrival_rates(double_flow, 0.001, DemandScenario.OD2016).hourly_rate
    assert r2 == tuple(2 * v for v in r1)
    assert r3 == tuple(2 * v for v in r1)


def test_evp_bounds_rejected():
    with pytest.raises(ValueError):
        arrival_rates(FLAT_1000, 0.0, DemandScenario.OD2016)
    with pytest.raises(ValueError):
        arrival_rates(FLAT_1000, 1.5, DemandScenario.OD2016)


def test_unknown_scenario_rejected():
    with pytest.raises(ValueError):
        arrival_rates(FLAT_1000, 0.01, "OD77")


def test_station_id_defaults_to_link():
    assert arrival_rates(FLAT_1000, 0.01, DemandScenario.OD2016).station_id == "L1"
    named = arrival_rates(FLAT_1000, 0.01, DemandScenario.OD2016, station_id="S9")
    assert named.station_id == "S9"


def test_avg_d_modulation():
    series = HourlyFlowSeries("L1", (1000.0,) * 24, tuple(4.0 + (h % 2) * 4.0 for h in range(24)))
    model = arrival_rates(series, 0.001, DemandScenario.OD2016,
                          avg_d_modulation=True, ref_d_km=4.0)
    assert model.hourly_rate[0] == pytest.approx(1.0)
    assert model.hourly_rate[1] == pytest.approx(2.0)
    with pytest.raises(ValueError, match="avg_d"):
        arrival_rates(FLAT_1000, 0.001, DemandScenario.OD2016, avg_d_modulation=True)


def test_arrival_model_validation():
    with pytest.raises(ValueError):
        ArrivalModel("S", (1.0,) * 23)
    with pytest.raises(ValueError):
        ArrivalModel("S", (-1.0,) + (1.0,) * 23)
    with pytest.raises(ValueError):
        ArrivalModel("S", (1.0,) * 24, jitter_cv=0.6)


def test_soc_degenerate_sd():
    rng = np.random.default_rng(1)
    sampler = SocSampler(mean=0.5, sd=0.0)
    draws = sample_recharge_fraction(sampler, rng, size=100)
    assert np.all(draws == 0.5)


def test_soc_degenerate_bounds():
    rng = np.random.default_rng(1)
    sampler = SocSampler(mean=0.5, sd=0.1, bounds=(0.5, 0.5))
    assert sample_recharge_fraction(sampler, rng) == 0.5


def test_soc_million_draws_mean_and_bounds():
    rng = np.random.default_rng(20260809)
    sampler = SocSampler()
    draws = sample_recharge_fraction(sampler, rng, size=1_000_000)
    # symmetric truncation leaves the mean at 0.5
    assert abs(float(draws.mean()) - 0.5) < 1e-3
    assert float(draws.min()) >= 0.2 and float(draws.max()) <= 0.8


def test_soc_deterministic_under_seed():
    a = sample_recharge_fraction(SocSampler(), np.random.default_rng(5), size=1000)
    b = sample_recharge_fraction(SocSampler(), np.random.default_rng(5), size=1000)
    assert np.array_equal(a, b)


def test_soc_sampler_validation():
    with pytest.raises(ValueError):
        SocSampler(mean=0.1, bounds=(0.2, 0.8))
    with pytest.raises(ValueError):
        SocSampler(sd=-0.1)
    with pytest.raises(ValueError):
        SocSampler(bounds=(0.0, 0.8))


def test_truncated_mean_symmetric_is_mean():
    assert truncated_mean(SocSampler()) == 0.5
    assert truncated_mean(SocSampler(sd=0.0)) == 0.5


def test_truncated_mean_against_numeric_integration():
    sampler = SocSampler(mean=0.5, sd=0.15, bounds=(0.3, 0.9))
    x = np.linspace(0.3, 0.9, 400_001)
    pdf = np.exp(-0.5 * ((x - 0.5) / 0.15) ** 2)
    numeric = float(np.trapezoid(x * pdf, x) / np.trapezoid(pdf, x))
    assert truncated_mean(sampler) == pytest.approx(numeric, abs=1e-9)


def test_jitter_factors():
    rng = np.random.default_rng(3)
    assert np.all(rate_jitter_factors(rng, 0.0) == 1.0)
    factors = rate_jitter_factors(np.random.default_rng(3), 0.2, n=20_000)
    assert float(factors.min()) >= 0.8 and float(factors.max()) <= 1.2
    assert abs(float(factors.mean()) - 1.0) < 5e-3
    with pytest.raises(ValueError):
        rate_jitter_factors(rng, 0.7)


def test_battery_grid_default_and_override():
    grid = battery_grid()
    assert len(grid) == 8 and grid[0] == 50.0 and grid[-1] == 106.0
    # consecutive sizes differ by 8 kWh, about a tenth of the reference pack
    assert all(b - a == 8.0 for a, b in zip(grid, grid[1:]))
    assert battery_grid(Config(battery_grid_kwh=(82.0,))) == (82.0,)
    with pytest.raises(ValueError):
        Config(battery_grid_kwh=())
