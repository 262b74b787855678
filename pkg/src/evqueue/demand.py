"""Turns traffic flows, EV penetration, and scenario scaling into arrival processes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import HOURS, Config, DemandScenario, HourlyFlowSeries


@dataclass(frozen=True)
class ArrivalModel:
    """Per-station hourly arrival rates plus the replication-level rate jitter.

    jitter_cv is the half-width of the rate variation band read as a 95%
    normal band: each replication multiplies every hourly mean rate by an
    independent factor ~ Normal(1, cv/1.96) truncated to [1-cv, 1+cv].
    """

    station_id: str
    hourly_rate: tuple[float, ...]
    jitter_cv: float = 0.2

    def __post_init__(self):
        if len(self.hourly_rate) != HOURS:
            raise ValueError(f"expected {HOURS} hourly rates, got {len(self.hourly_rate)}")
        for h, r in enumerate(self.hourly_rate):
            if not (math.isfinite(r) and r >= 0):
                raise ValueError(f"rate at hour {h} must be finite and >= 0, got {r}")
        if not (0 <= self.jitter_cv <= 0.5):
            raise ValueError(f"jitter_cv must be in [0, 0.5], got {self.jitter_cv}")


@dataclass(frozen=True)
class SocSampler:
    """Recharge-fraction draw: normal truncated by rejection to closed bounds."""

    mean: float = 0.5
    sd: float = 0.1
    bounds: tuple[float, float] = (0.2, 0.8)

    def __post_init__(self):
        lo, hi = self.bounds
        if not (0 < lo <= hi <= 1):
            raise ValueError(f"bounds must satisfy 0 < lo <= hi <= 1, got {self.bounds}")
        if not (lo <= self.mean <= hi):
            raise ValueError(f"mean {self.mean} outside bounds {self.bounds}")
        if self.sd < 0:
            raise ValueError(f"sd must be >= 0, got {self.sd}")

    @classmethod
    def from_config(cls, config: Config) -> "SocSampler":
        return cls(mean=config.soc_mean, sd=config.soc_sd, bounds=tuple(config.soc_bounds))


def arrival_rates(
    flows: HourlyFlowSeries,
    ev_p: float,
    scenario: DemandScenario,
    station_id: str | None = None,
    jitter_cv: float = 0.2,
    avg_d_modulation: bool = False,
    ref_d_km: float | None = None,
) -> ArrivalModel:
    """Hourly charging-arrival rates: rate[h] = flow[h] * scenario scale * ev_p.

    ev_p is a fraction (percent conversion happens at CLI/file boundaries).
    With avg_d_modulation on, rates are additionally scaled by the flow
    series' hourly mean trip distance relative to ref_d_km (its daily mean
    when not given); off by default because no canonical form exists.
    """
    if not (0 < ev_p <= 1):
        raise ValueError(f"ev_p must be a fraction in (0, 1], got {ev_p}")
    if not isinstance(scenario, DemandScenario):
        scenario = DemandScenario.parse(str(scenario))
    rates = [f * scenario.scale * ev_p for f in flows.flows]
    if avg_d_modulation:
        if flows.avg_d_km is None:
            raise ValueError(f"link {flows.link_id}: avg_d modulation requested but series has no avg_d_km")
        ref = ref_d_km if ref_d_km is not None else sum(flows.avg_d_km) / HOURS
        if not (ref > 0):
            raise ValueError(f"ref_d_km must be > 0, got {ref}")
        rates = [r * d / ref for r, d in zip(rates, flows.avg_d_km)]
    return ArrivalModel(
        station_id=station_id if station_id is not None else flows.link_id,
        hourly_rate=tuple(rates),
        jitter_cv=jitter_cv,
    )


def _truncated_normal(rng, mean, sd, lo, hi, n):
    """Rejection-sampled Normal(mean, sd) restricted to [lo, hi]."""
    if sd == 0 or lo == hi:
        return np.full(n, mean if lo != hi else lo)
    out = np.empty(n)
    filled = 0
    rounds = 0
    while filled < n:
        draw = rng.normal(mean, sd, size=max(n - filled, 16))
        keep = draw[(draw >= lo) & (draw <= hi)]
        take = min(len(keep), n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
        rounds += 1
        if rounds > 1000:
            raise RuntimeError(
                f"rejection sampling stalled: bounds [{lo}, {hi}] accept almost "
                f"no mass of normal({mean}, {sd})"
            )
    return out


def sample_recharge_fraction(sampler: SocSampler, rng: np.random.Generator, size=None):
    """Draw recharge fractions; scalar when size is None, else ndarray of size."""
    lo, hi = sampler.bounds
    out = _truncated_normal(rng, sampler.mean, sampler.sd, lo, hi, 1 if size is None else int(size))
    return float(out[0]) if size is None else out


def rate_jitter_factors(rng: np.random.Generator, jitter_cv: float, n: int = HOURS) -> np.ndarray:
    """One multiplicative rate factor per hour: Normal(1, cv/1.96) in [1-cv, 1+cv]."""
    if not (0 <= jitter_cv <= 0.5):
        raise ValueError(f"jitter_cv must be in [0, 0.5], got {jitter_cv}")
    if jitter_cv == 0:
        return np.ones(n)
    return _truncated_normal(rng, 1.0, jitter_cv / 1.96, 1 - jitter_cv, 1 + jitter_cv, n)


def truncated_mean(sampler: SocSampler) -> float:
    """Exact expectation of the truncated normal the sampler draws from.

    Symmetric bounds leave the mean untouched; asymmetric bounds shift it by
    sd * (phi(a) - phi(b)) / (Phi(b) - Phi(a)).
    """
    lo, hi = sampler.bounds
    if sampler.sd == 0 or lo == hi:
        return sampler.mean if lo != hi else lo
    a = (lo - sampler.mean) / sampler.sd
    b = (hi - sampler.mean) / sampler.sd
    phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    cdf = lambda z: 0.5 * (1 + math.erf(z / math.sqrt(2)))
    mass = cdf(b) - cdf(a)
    if mass <= 0:
        raise ValueError(f"bounds {sampler.bounds} carry no probability mass")
    return sampler.mean + sampler.sd * (phi(a) - phi(b)) / mass


def battery_grid(config: Config | None = None) -> tuple[float, ...]:
    """Battery sizes (kWh) covered by the sweep; the default spans 50 to 106."""
    grid = tuple(config.battery_grid_kwh) if config is not None else tuple(Config().battery_grid_kwh)
    if not grid:
        raise ValueError("battery grid must be non-empty")
    if any(b <= 0 for b in grid):
        raise ValueError("battery grid entries must be > 0")
    return grid
