"""Discrete-event FCFS simulation of one charging station.

The engine replays the same system the analytic solver describes: Poisson
arrivals at piecewise-constant hourly rates, exponential charging durations
whose mean comes from the sampled recharge fraction, c plugs, and a hard cap
on cars present. Arrivals finding the station full vanish (no retrial).
Per-replication rate jitter reproduces the +/-20% arrival variation; config
switches select the literal normal inter-arrival reading or deterministic
charging durations for sensitivity runs.

Statistics exclude the warmup window. Arrivals stop at the horizon and cars
already admitted are drained to completion, so per-car averages carry no
censoring bias; time averages integrate over [warmup, horizon) only.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import HOURS, Station
from .demand import ArrivalModel, SocSampler, rate_jitter_factors, sample_recharge_fraction

INTER_ARRIVAL_MODES = ("exponential", "normal")
SERVICE_DIST_MODES = ("exponential", "deterministic")

WARMUP_SERVICE_MULTIPLE = 10.0


@dataclass(frozen=True)
class SimConfig:
    """One replication's full parameterization."""

    station: Station
    arrivals: ArrivalModel
    soc: SocSampler
    battery_kwh: float
    horizon_h: float
    warmup_h: float | None = None  # None: 10x the mean service time
    replication_seed: int = 0
    inter_arrival: str = "exponential"
    service_dist: str = "exponential"
    collect_trace: bool = False

    def __post_init__(self):
        if not (self.horizon_h > 0 and math.isfinite(self.horizon_h)):
            raise ValueError(f"horizon_h must be finite and > 0, got {self.horizon_h}")
        if not (self.battery_kwh > 0):
            raise ValueError(f"battery_kwh must be > 0, got {self.battery_kwh}")
        if self.warmup_h is not None:
            if self.warmup_h < 0:
                raise ValueError(f"warmup_h must be >= 0, got {self.warmup_h}")
            if self.warmup_h >= self.horizon_h:
                raise ValueError(
                    f"warmup_h ({self.warmup_h}) must be < horizon_h ({self.horizon_h})"
                )
        if self.inter_arrival not in INTER_ARRIVAL_MODES:
            raise ValueError(f"inter_arrival must be one of {INTER_ARRIVAL_MODES}")
        if self.service_dist not in SERVICE_DIST_MODES:
            raise ValueError(f"service_dist must be one of {SERVICE_DIST_MODES}")
        if not (0 <= self.replication_seed < 2**64):
            raise ValueError("replication_seed must fit in 64 bits")

    @property
    def mean_service_h(self) -> float:
        return self.soc.mean * self.battery_kwh / self.station.charger_power_kw

    @property
    def effective_warmup_h(self) -> float:
        if self.warmup_h is not None:
            return self.warmup_h
        warmup = WARMUP_SERVICE_MULTIPLE * self.mean_service_h
        # default must stay a proper prefix of the run
        return min(warmup, 0.5 * self.horizon_h)


@dataclass
class SimResult:
    """Post-warmup statistics of one replication (O1..O9 plus bookkeeping)."""

    mean_queue: float
    mean_wait_h: float
    mean_service_h: float
    mean_total_time_h: float
    energy_kwh_total: float
    energy_per_session_kwh: float
    max_queue: int
    max_wait_h: float
    max_total_time_h: float
    max_hourly_energy_kwh: float
    arrivals: int
    blocked: int
    served: int
    hourly_mean_queue: np.ndarray
    hourly_mean_wait_h: np.ndarray
    hourly_mean_service_h: np.ndarray
    hourly_mean_total_h: np.ndarray
    hourly_energy_kwh: np.ndarray
    hourly_arrivals: np.ndarray
    hourly_blocked: np.ndarray
    trace: list | None = field(default=None, repr=False)

    @property
    def blocking_fraction(self) -> float:
        return self.blocked / self.arrivals if self.arrivals > 0 else 0.0


SCALAR_METRICS = (
    "mean_queue", "mean_wait_h", "mean_service_h", "mean_total_time_h",
    "energy_kwh_total", "energy_per_session_kwh",
    "max_queue", "max_wait_h", "max_total_time_h", "max_hourly_energy_kwh",
    "arrivals", "blocked", "served", "blocking_fraction",
)
HOURLY_METRICS = (
    "hourly_mean_queue", "hourly_mean_wait_h", "hourly_mean_service_h",
    "hourly_mean_total_h", "hourly_energy_kwh", "hourly_arrivals", "hourly_blocked",
)


def _poisson_arrival_times(rates24, horizon, rng):
    """Poisson process with piecewise-constant hourly rate on [0, horizon)."""
    n_full = int(math.floor(horizon))
    starts = np.arange(n_full, dtype=float)
    lengths = np.ones(n_full)
    if horizon > n_full:
        starts = np.append(starts, float(n_full))
        lengths = np.append(lengths, horizon - n_full)
    if len(starts) == 0:
        return np.empty(0)
    seg_rates = rates24[np.arange(len(starts)) % HOURS]
    counts = rng.poisson(seg_rates * lengths)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0)
    u = rng.random(total)
    times = np.repeat(starts, counts) + u * np.repeat(lengths, counts)
    times.sort()
    return times


def _normal_gap_arrival_times(rates24, cv, horizon, rng):
    """Renewal process with Normal(m, cv*m/1.96) gaps truncated at 0.

    The gap mean m is the reciprocal of the rate of the hour that the gap
    starts in; rate changes mid-gap are not re-weighted (sensitivity mode).
    """
    times = []
    t = 0.0
    sd_scale = cv / 1.96
    while t < horizon:
        hour = int(math.floor(t))
        rate = rates24[hour % HOURS]
        if rate <= 0:
            t = float(hour + 1)
            continue
        m = 1.0 / rate
        gap = -1.0
        while gap <= 0:
            gap = rng.normal(m, sd_scale * m) if sd_scale > 0 else m
        t += gap
        if t < horizon:
            times.append(t)
    return np.array(times)


def simulate(config: SimConfig) -> SimResult:
    """Run one replication; identical seed gives a bit-identical result."""
    station = config.station
    c = station.plugs
    cap = station.capacity
    power = station.charger_power_kw
    battery = config.battery_kwh
    horizon = config.horizon_h
    warmup = config.effective_warmup_h

    ss = np.random.SeedSequence(config.replication_seed)
    rng_arr, rng_jit, rng_frac, rng_srv = (np.random.default_rng(s) for s in ss.spawn(4))

    base_rates = np.asarray(config.arrivals.hourly_rate, dtype=float)
    if config.inter_arrival == "exponential":
        jitter = rate_jitter_factors(rng_jit, config.arrivals.jitter_cv)
        arrivals = _poisson_arrival_times(base_rates * jitter, horizon, rng_arr)
    else:
        # the +/-20% lives in the gaps themselves here; no extra rate jitter
        arrivals = _normal_gap_arrival_times(
            base_rates, config.arrivals.jitter_cv, horizon, rng_arr
        )
    n_arr = len(arrivals)

    fracs = sample_recharge_fraction(config.soc, rng_frac, size=n_arr) if n_arr else np.empty(0)
    if config.service_dist == "exponential":
        durations = rng_srv.standard_exponential(n_arr) * (fracs * battery / power)
    else:
        durations = fracs * battery / power

    # state
    busy = 0
    waiting: deque[int] = deque()
    completions: list[tuple[float, int]] = []  # (end_time, admitted index)
    admitted_t: list[float] = []
    admitted_frac: list[float] = []
    admitted_dur: list[float] = []
    start_t: list[float] = []
    n_admitted = 0

    # accumulators (post-warmup, clipped to horizon for time averages)
    queue_integral = 0.0
    bin_queue_integral = np.zeros(HOURS)
    bin_elapsed = np.zeros(HOURS)
    max_queue = 0
    n_counted_arrivals = 0
    n_blocked = 0
    bin_arrivals = np.zeros(HOURS, dtype=int)
    bin_blocked = np.zeros(HOURS, dtype=int)
    trace = [] if config.collect_trace else None

    last_t = 0.0

    def advance(now):
        nonlocal last_t, queue_integral, max_queue
        a = max(last_t, warmup)
        b = min(now, horizon)
        if a < b:
            w = float(len(waiting))
            max_queue = max(max_queue, len(waiting))
            queue_integral += w * (b - a)
            h = math.floor(a)
            while h < b:
                seg = min(b, h + 1.0) - max(a, h)
                idx = int(h) % HOURS
                bin_queue_integral[idx] += w * seg
                bin_elapsed[idx] += seg
                h += 1.0
        last_t = now

    def start_service(j, now):
        nonlocal busy
        busy += 1
        start_t[j] = now
        heapq.heappush(completions, (now + admitted_dur[j], j))
        if trace is not None:
            trace.append((now, "start", busy + len(waiting)))

    i = 0
    while i < n_arr or completions:
        t_arr = arrivals[i] if i < n_arr else math.inf
        t_dep = completions[0][0] if completions else math.inf
        if t_dep <= t_arr:
            now, j = heapq.heappop(completions)
            advance(now)
            busy -= 1
            if waiting:
                start_service(waiting.popleft(), now)
            if trace is not None:
                trace.append((now, "depart", busy + len(waiting)))
        else:
            now = t_arr
            i += 1
            advance(now)
            counted = now >= warmup
            hour_bin = int(math.floor(now)) % HOURS
            if counted:
                n_counted_arrivals += 1
                bin_arrivals[hour_bin] += 1
            if busy + len(waiting) >= cap:
                if counted:
                    n_blocked += 1
                    bin_blocked[hour_bin] += 1
                if trace is not None:
                    trace.append((now, "block", busy + len(waiting)))
            else:
                j = n_admitted
                n_admitted += 1
                admitted_t.append(now)
                admitted_frac.append(float(fracs[i - 1]))
                admitted_dur.append(float(durations[i - 1]))
                start_t.append(math.nan)
                if trace is not None:
                    trace.append((now, "arrive", busy + len(waiting) + 1))
                if busy < c:
                    start_service(j, now)
                else:
                    waiting.append(j)
                    if now >= warmup:
                        max_queue = max(max_queue, len(waiting))
        # the engine's two safety invariants, checked at every event
        assert not (waiting and busy < c), "work conservation violated"
        assert busy + len(waiting) <= cap, "capacity bound violated"

    advance(max(horizon, last_t))

    # per-car statistics over cars admitted after warmup (all of them complete)
    window = horizon - warmup
    waits = np.zeros(0)
    services = np.zeros(0)
    totals = np.zeros(0)
    energies = np.zeros(0)
    arr_bins = np.zeros(0, dtype=int)
    if n_admitted:
        t_a = np.array(admitted_t)
        mask = t_a >= warmup
        waits = np.array(start_t)[mask] - t_a[mask]
        services = np.array(admitted_dur)[mask]
        totals = waits + services
        energies = np.array(admitted_frac)[mask] * battery
        arr_bins = np.floor(t_a[mask]).astype(int) % HOURS

    served = len(waits)
    bin_energy = np.zeros(HOURS)
    abs_hour_energy: dict[int, float] = {}
    if served:
        starts = np.array(start_t)[np.array(admitted_t) >= warmup]
        for s, d, e in zip(starts, services, energies):
            _spread_energy(e, s, s + d, bin_energy, abs_hour_energy)

    def bin_mean(values, bins):
        sums = np.zeros(HOURS)
        counts = np.zeros(HOURS)
        np.add.at(sums, bins, values)
        np.add.at(counts, bins, 1)
        with np.errstate(invalid="ignore"):
            out = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        return out

    return SimResult(
        mean_queue=queue_integral / window,
        mean_wait_h=float(waits.mean()) if served else 0.0,
        mean_service_h=float(services.mean()) if served else 0.0,
        mean_total_time_h=float(totals.mean()) if served else 0.0,
        energy_kwh_total=float(energies.sum()),
        energy_per_session_kwh=float(energies.mean()) if served else 0.0,
        max_queue=max_queue,
        max_wait_h=float(waits.max()) if served else 0.0,
        max_total_time_h=float(totals.max()) if served else 0.0,
        max_hourly_energy_kwh=float(max(abs_hour_energy.values())) if abs_hour_energy else 0.0,
        arrivals=n_counted_arrivals,
        blocked=n_blocked,
        served=served,
        hourly_mean_queue=np.where(bin_elapsed > 0, bin_queue_integral / np.maximum(bin_elapsed, 1e-300), 0.0),
        hourly_mean_wait_h=bin_mean(waits, arr_bins) if served else np.zeros(HOURS),
        hourly_mean_service_h=bin_mean(services, arr_bins) if served else np.zeros(HOURS),
        hourly_mean_total_h=bin_mean(totals, arr_bins) if served else np.zeros(HOURS),
        hourly_energy_kwh=bin_energy,
        hourly_arrivals=bin_arrivals,
        hourly_blocked=bin_blocked,
        trace=trace,
    )


def _spread_energy(e, t0, t1, bins, abs_acc):
    """Book session energy into hour bins proportionally to service overlap."""
    d = t1 - t0
    if d <= 0:
        h = int(math.floor(t0))
        bins[h % HOURS] += e
        abs_acc[h] = abs_acc.get(h, 0.0) + e
        return
    h = math.floor(t0)
    while h < t1:
        seg = min(t1, h + 1.0) - max(t0, h)
        if seg > 0:
            share = e * seg / d
            bins[int(h) % HOURS] += share
            k = int(h)
            abs_acc[k] = abs_acc.get(k, 0.0) + share
        h += 1.0


def trace_hash(trace) -> str:
    """Stable digest of an event trace; equal seeds must produce equal hashes."""
    if trace is None:
        raise ValueError("trace was not collected (set collect_trace=True)")
    payload = "\n".join(f"{t:.12e},{ev},{n}" for t, ev, n in trace)
    return hashlib.sha256(payload.encode()).hexdigest()


def write_trace(trace, path, station_id: str) -> None:
    """Debug trace CSV: time_h,event,station_id,system_count."""
    if trace is None:
        raise ValueError("trace was not collected (set collect_trace=True)")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("time_h,event,station_id,system_count\n")
        for t, ev, n in trace:
            fh.write(f"{t!r},{ev},{station_id},{n}\n")


@dataclass
class ReplicationSummary:
    """Across-replication means with 95% normal-approximation half-widths."""

    n_reps: int
    results: list[SimResult]
    mean: dict[str, float | np.ndarray]
    halfwidth: dict[str, float | np.ndarray]


def replicate(config: SimConfig, n_reps: int) -> ReplicationSummary:
    """Run independent replications with seeds derived from the config seed."""
    if n_reps < 2:
        raise ValueError(f"n_reps must be >= 2, got {n_reps}")
    seeds = np.random.SeedSequence(config.replication_seed).generate_state(n_reps, dtype=np.uint64)
    results = []
    for s in seeds:
        rep_cfg = SimConfig(
            station=config.station, arrivals=config.arrivals, soc=config.soc,
            battery_kwh=config.battery_kwh, horizon_h=config.horizon_h,
            warmup_h=config.warmup_h, replication_seed=int(s),
            inter_arrival=config.inter_arrival, service_dist=config.service_dist,
        )
        results.append(simulate(rep_cfg))

    mean: dict[str, float | np.ndarray] = {}
    halfwidth: dict[str, float | np.ndarray] = {}
    z = 1.96
    for name in SCALAR_METRICS:
        values = np.array([float(getattr(r, name)) for r in results])
        mean[name] = float(values.mean())
        halfwidth[name] = float(z * values.std(ddof=1) / math.sqrt(n_reps))
    for name in HOURLY_METRICS:
        values = np.stack([np.asarray(getattr(r, name), dtype=float) for r in results])
        mean[name] = values.mean(axis=0)
        halfwidth[name] = z * values.std(axis=0, ddof=1) / math.sqrt(n_reps)
    return ReplicationSummary(n_reps=n_reps, results=results, mean=mean, halfwidth=halfwidth)
