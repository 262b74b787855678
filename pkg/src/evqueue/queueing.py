"""Exact steady-state analysis of a finite-capacity multi-server charging queue.

A station with c identical plugs and room for N cars in total (charging plus
waiting) under Poisson arrivals and exponential charging times is an M/M/c/N
queue. Its stationary distribution has the product form

    pi_k  proportional to  rho^k / k!                 for k <= c
    pi_k  proportional to  rho^k / (c! * c^(k-c))     for c <= k <= N

with rho = lambda * E[S] the offered load in Erlangs. The weights are built
by the ratio recurrence w_k = w_{k-1} * rho / min(k, c) with on-the-fly
rescaling, so capacities into the thousands stay stable without factorials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_RESCALE_THRESHOLD = 1e280


@dataclass(frozen=True)
class QueueParams:
    """Inputs of the steady-state solve.

    arrival_rate is in vehicles/hour, mean_service_time_h in hours (the
    service *rate* is its reciprocal). charger_power_kw is optional and only
    feeds the per-session energy output.
    """

    arrival_rate: float
    mean_service_time_h: float
    servers: int
    capacity: int
    charger_power_kw: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.arrival_rate) and self.arrival_rate >= 0):
            raise ValueError(f"arrival_rate must be finite and >= 0, got {self.arrival_rate}")
        if not (self.mean_service_time_h > 0 and math.isfinite(self.mean_service_time_h)):
            raise ValueError(f"mean_service_time_h must be finite and > 0, got {self.mean_service_time_h}")
        if not isinstance(self.servers, int) or self.servers < 1:
            raise ValueError(f"servers must be a positive integer, got {self.servers}")
        if not isinstance(self.capacity, int) or self.capacity < self.servers:
            raise ValueError(
                f"capacity must be an integer >= servers ({self.servers}), got {self.capacity}"
            )
        if self.charger_power_kw is not None and not (self.charger_power_kw > 0):
            raise ValueError(f"charger_power_kw must be > 0, got {self.charger_power_kw}")


@dataclass(frozen=True)
class QueueSolution:
    """Steady-state outputs: stationary distribution plus the O1..O5 metrics."""

    pi: np.ndarray                  # length capacity+1, sums to 1
    offered_load: float             # rho, Erlangs
    mean_queue: float               # O1, vehicles waiting (excludes in-service)
    mean_wait_h: float              # O2, hours in queue
    mean_service_h: float           # O3, hours plugged in
    mean_total_time_h: float        # O4 = O2 + O3
    energy_per_session_kwh: float   # O5 per admitted vehicle; 0 if power unknown
    blocking_prob: float            # pi_N
    effective_arrival_rate: float   # lambda * (1 - pi_N)


def service_time(recharge_fraction: float, battery_kwh: float, charger_power_kw: float) -> float:
    """Hours to deliver recharge_fraction of a battery at the charger's power.

    The session's energy is charger_power_kw * service_time, which cancels
    back to recharge_fraction * battery_kwh.
    """
    if not (recharge_fraction > 0):
        raise ValueError(f"recharge_fraction must be > 0, got {recharge_fraction}")
    if recharge_fraction > 1:
        raise ValueError(f"recharge_fraction must be <= 1, got {recharge_fraction}")
    if not (battery_kwh > 0):
        raise ValueError(f"battery_kwh must be > 0, got {battery_kwh}")
    if not (charger_power_kw > 0):
        raise ValueError(f"charger_power_kw must be > 0, got {charger_power_kw}")
    return recharge_fraction * battery_kwh / charger_power_kw


def offered_load(arrival_rate: float, mean_service_time_h: float) -> float:
    """Offered load rho = arrival rate x mean service time, in Erlangs."""
    if not (mean_service_time_h > 0):
        raise ValueError(f"mean_service_time_h must be > 0, got {mean_service_time_h}")
    if not (arrival_rate >= 0):
        raise ValueError(f"arrival_rate must be >= 0, got {arrival_rate}")
    return arrival_rate * mean_service_time_h


def solve(params: QueueParams) -> QueueSolution:
    """Stationary distribution and O1..O5 for the finite-capacity queue."""
    lam = params.arrival_rate
    es = params.mean_service_time_h
    c = params.servers
    n = params.capacity
    power = params.charger_power_kw
    session_kwh = power * es if power is not None else 0.0

    if lam == 0.0:
        pi = np.zeros(n + 1)
        pi[0] = 1.0
        return QueueSolution(
            pi=pi, offered_load=0.0, mean_queue=0.0, mean_wait_h=0.0,
            mean_service_h=es, mean_total_time_h=es,
            energy_per_session_kwh=session_kwh,
            blocking_prob=0.0, effective_arrival_rate=0.0,
        )

    rho = lam * es
    weights = [1.0]
    total = 1.0
    w = 1.0
    for k in range(1, n + 1):
        w *= rho / min(k, c)
        weights.append(w)
        total += w
        if total > _RESCALE_THRESHOLD:
            inv = 1.0 / total
            weights = [x * inv for x in weights]
            w = weights[-1]
            total = 1.0

    pi = np.array(weights) / total
    blocking = float(pi[n])
    mean_queue = float(sum((k - c) * pi[k] for k in range(c + 1, n + 1)))
    lam_eff = lam * (1.0 - blocking)
    mean_wait = mean_queue / lam_eff if lam_eff > 0 else 0.0

    return QueueSolution(
        pi=pi,
        offered_load=rho,
        mean_queue=mean_queue,
        mean_wait_h=mean_wait,
        mean_service_h=es,
        mean_total_time_h=mean_wait + es,
        energy_per_session_kwh=session_kwh,
        blocking_prob=blocking,
        effective_arrival_rate=lam_eff,
    )


def erlang_b(servers: int, load: float) -> float:
    """Erlang-B blocking for a zero-waiting-room system by the stable recursion.

    B(0) = 1,  B(k) = rho * B(k-1) / (k + rho * B(k-1)).
    """
    if not isinstance(servers, int) or servers < 1:
        raise ValueError(f"servers must be a positive integer, got {servers}")
    if not (load >= 0):
        raise ValueError(f"load must be >= 0, got {load}")
    b = 1.0
    for k in range(1, servers + 1):
        b = load * b / (k + load * b)
    return b
