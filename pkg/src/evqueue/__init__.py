"""Finite-capacity charging-queue toolkit: analytic solver, simulation, sweeps."""

from .core import (
    Config,
    ChargeRequest,
    DemandScenario,
    GridProfile,
    HourlyFlowSeries,
    SchemaError,
    ScenarioSpec,
    Station,
    StationRegistry,
    load_flows,
    load_grid_profiles,
    load_station_registry,
    write_flows,
    write_station_registry,
)
from .queueing import QueueParams, QueueSolution, erlang_b, offered_load, service_time, solve
from .demand import (
    ArrivalModel,
    SocSampler,
    arrival_rates,
    battery_grid,
    rate_jitter_factors,
    sample_recharge_fraction,
    truncated_mean,
)
from .des import ReplicationSummary, SimConfig, SimResult, replicate, simulate, trace_hash
from .coupling import CongestionReport, LinkSpec, link_time, load_links, network_delta
from .energy import (
    CoincidenceReport,
    PlugCountEnergyRow,
    energy_vs_plugs,
    grid_coincidence,
    station_energy,
)
from .sweep import SweepPlan, SweepResult, plan, run

__version__ = "0.1.0"

__all__ = [
    "ArrivalModel", "ChargeRequest", "CoincidenceReport", "Config", "CongestionReport",
    "DemandScenario", "GridProfile", "HourlyFlowSeries", "LinkSpec",
    "PlugCountEnergyRow", "QueueParams", "QueueSolution", "ReplicationSummary",
    "ScenarioSpec", "SchemaError", "SimConfig", "SimResult", "SocSampler",
    "Station", "StationRegistry", "SweepPlan", "SweepResult",
    "arrival_rates", "battery_grid", "energy_vs_plugs", "erlang_b",
    "grid_coincidence", "link_time", "load_flows", "load_grid_profiles",
    "load_links", "load_station_registry", "network_delta", "offered_load",
    "plan", "rate_jitter_factors", "replicate", "run", "sample_recharge_fraction",
    "service_time", "simulate", "solve", "station_energy", "trace_hash",
    "truncated_mean", "write_flows", "write_station_registry",
]
