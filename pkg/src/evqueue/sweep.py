"""Scenario-grid enumeration and parallel evaluation.

A sweep covers demand scenario x penetration rate x battery size x station,
evaluated hour by hour; the default grids enumerate well past 90,000
station-hour cells. Cells are independent, so execution parallelizes over
(scenario, ev_p, battery, station) combos; output row order is canonical
(grid order) regardless of worker count, and every random quantity derives
from the master seed by hashing the cell key, so reruns are bit-identical.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from multiprocessing import Pool

from .core import HOURS, Config, DemandScenario, HourlyFlowSeries, StationRegistry
from .demand import ArrivalModel, SocSampler, arrival_rates, truncated_mean
from .des import SimConfig, simulate
from .queueing import QueueParams, solve

MODES = ("analytic", "des", "both")

KEY_COLUMNS = ("scenario", "evp_percent", "battery_kwh", "station_id", "hour")
ANALYTIC_COLUMNS = (
    "plugs", "arrival_rate_vph", "offered_load_erl",
    "o1_queue_veh", "o2_wait_h", "o3_service_h", "o4_total_h", "o5_session_kwh",
    "blocking_prob", "effective_rate_vph", "energy_kwh",
)
DES_COLUMNS = (
    "des_o1_queue_veh", "des_o2_wait_h", "des_o3_service_h", "des_o4_total_h",
    "des_o5_session_kwh", "des_o6_max_queue_veh", "des_o7_max_wait_h",
    "des_o8_max_total_h", "des_o9_max_hourly_kwh", "des_energy_kwh",
    "des_arrivals", "des_blocked", "des_blocking_frac",
)

AGREE_REL = 0.03
AGREE_ABS = 0.01


@dataclass(frozen=True)
class SweepPlan:
    """Deterministic enumeration of the full scenario grid."""

    scenarios: tuple[str, ...]
    evp_percents: tuple[float, ...]
    battery_grid_kwh: tuple[float, ...]
    station_ids: tuple[str, ...]
    mode: str
    master_seed: int
    soc_mean: float = 0.5
    soc_sd: float = 0.1
    soc_bounds: tuple[float, float] = (0.2, 0.8)
    arrival_cv: float = 0.2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name, grid in (
            ("scenarios", self.scenarios),
            ("evp_percents", self.evp_percents),
            ("battery_grid_kwh", self.battery_grid_kwh),
            ("station_ids", self.station_ids),
        ):
            if not grid:
                raise ValueError(f"{name} must be non-empty")
        for s in self.scenarios:
            DemandScenario.parse(s)

    @property
    def combo_count(self) -> int:
        return (
            len(self.scenarios) * len(self.evp_percents)
            * len(self.battery_grid_kwh) * len(self.station_ids)
        )

    @property
    def cell_count(self) -> int:
        return self.combo_count * HOURS

    def combos(self):
        """Canonical combo order: scenario, then ev_p, battery, station."""
        for scen in self.scenarios:
            for evp in self.evp_percents:
                for battery in self.battery_grid_kwh:
                    for sid in self.station_ids:
                        yield scen, evp, battery, sid

    def cell_seed(self, scenario: str, evp_percent: float, battery_kwh: float, station_id: str) -> int:
        """64-bit seed hashed from the master seed and the cell key."""
        key = f"{self.master_seed}|{scenario}|{evp_percent:.10g}|{battery_kwh:.10g}|{station_id}"
        digest = hashlib.sha256(key.encode()).digest()
        return int.from_bytes(digest[:8], "big")

    @property
    def header(self) -> tuple[str, ...]:
        cols = KEY_COLUMNS
        if self.mode in ("analytic", "both"):
            cols = cols + ANALYTIC_COLUMNS
        else:
            cols = cols + ("plugs",)
        if self.mode in ("des", "both"):
            cols = cols + DES_COLUMNS
        if self.mode == "both":
            cols = cols + ("agree_o1",)
        return cols


def plan(config: Config, registry: StationRegistry, mode: str = "analytic",
         master_seed: int | None = None) -> SweepPlan:
    """Build the sweep plan from the global config and a station registry."""
    return SweepPlan(
        scenarios=tuple(config.demand_scenarios),
        evp_percents=tuple(config.evp_grid_percent),
        battery_grid_kwh=tuple(config.battery_grid_kwh),
        station_ids=tuple(s.id for s in registry),
        mode=mode,
        master_seed=config.seed if master_seed is None else master_seed,
        soc_mean=config.soc_mean,
        soc_sd=config.soc_sd,
        soc_bounds=tuple(config.soc_bounds),
        arrival_cv=config.arrival_cv,
    )


@dataclass
class SweepResult:
    plan: SweepPlan
    header: tuple[str, ...]
    rows: list[tuple]

    def to_dicts(self):
        idx = {name: i for i, name in enumerate(self.header)}
        return [{name: row[i] for name, i in idx.items()} for row in self.rows]

    def energy_rows(self):
        """Minimal per-cell energy mappings for the energy aggregations."""
        idx = {name: i for i, name in enumerate(self.header)}
        energy_col = "energy_kwh" if "energy_kwh" in idx else "des_energy_kwh"
        return [
            {
                "scenario": row[idx["scenario"]],
                "evp_percent": row[idx["evp_percent"]],
                "battery_kwh": row[idx["battery_kwh"]],
                "station_id": row[idx["station_id"]],
                "plugs": row[idx["plugs"]],
                "hour": row[idx["hour"]],
                "energy_kwh": row[idx[energy_col]],
            }
            for row in self.rows
        ]


def _evaluate_combo(plan_: SweepPlan, station, flow_series: HourlyFlowSeries,
                    scen_name: str, evp_percent: float, battery: float):
    scenario = DemandScenario.parse(scen_name)
    evp = evp_percent / 100.0
    model = arrival_rates(flow_series, evp, scenario,
                          station_id=station.id, jitter_cv=plan_.arrival_cv)
    soc = SocSampler(mean=plan_.soc_mean, sd=plan_.soc_sd, bounds=tuple(plan_.soc_bounds))
    mean_frac = truncated_mean(soc)
    es = mean_frac * battery / station.charger_power_kw

    analytic = None
    if plan_.mode in ("analytic", "both"):
        analytic = [
            solve(QueueParams(
                arrival_rate=rate, mean_service_time_h=es,
                servers=station.plugs, capacity=station.capacity,
                charger_power_kw=station.charger_power_kw,
            ))
            for rate in model.hourly_rate
        ]

    sim = None
    if plan_.mode in ("des", "both"):
        seed = plan_.cell_seed(scen_name, evp_percent, battery, station.id)
        sim = simulate(SimConfig(
            station=station, arrivals=model, soc=soc, battery_kwh=battery,
            horizon_h=float(HOURS), warmup_h=0.0, replication_seed=seed,
        ))

    rows = []
    for h in range(HOURS):
        row = [scen_name, evp_percent, battery, station.id, h]
        if analytic is not None:
            sol = analytic[h]
            row += [
                station.plugs, model.hourly_rate[h], sol.offered_load,
                sol.mean_queue, sol.mean_wait_h, sol.mean_service_h,
                sol.mean_total_time_h, sol.energy_per_session_kwh,
                sol.blocking_prob, sol.effective_arrival_rate,
                sol.effective_arrival_rate * sol.energy_per_session_kwh,
            ]
        else:
            row += [station.plugs]
        if sim is not None:
            row += [
                float(sim.hourly_mean_queue[h]), float(sim.hourly_mean_wait_h[h]),
                float(sim.hourly_mean_service_h[h]), float(sim.hourly_mean_total_h[h]),
                sim.energy_per_session_kwh, sim.max_queue, sim.max_wait_h,
                sim.max_total_time_h, sim.max_hourly_energy_kwh,
                float(sim.hourly_energy_kwh[h]),
                int(sim.hourly_arrivals[h]), int(sim.hourly_blocked[h]),
                sim.blocking_fraction,
            ]
        if plan_.mode == "both":
            an_o1 = analytic[h].mean_queue
            des_o1 = float(sim.hourly_mean_queue[h])
            row.append(int(abs(des_o1 - an_o1) <= max(AGREE_REL * an_o1, AGREE_ABS)))
        rows.append(tuple(row))
    return rows


def _worker(task):
    plan_, station, flow_series, scen, evp, battery = task
    try:
        return _evaluate_combo(plan_, station, flow_series, scen, evp, battery)
    except Exception as exc:
        raise RuntimeError(
            f"sweep cell failed: scenario={scen} evp={evp}% battery={battery} "
            f"station={station.id}: {exc}"
        ) from exc


def run(plan_: SweepPlan, registry: StationRegistry, flows: list[HourlyFlowSeries],
        jobs: int = 1) -> SweepResult:
    """Evaluate every cell; canonical row order independent of worker count."""
    stations = {s.id: s for s in registry}
    flow_by_link = {f.link_id: f for f in flows}
    tasks = []
    for scen, evp, battery, sid in plan_.combos():
        station = stations.get(sid)
        if station is None:
            raise ValueError(f"plan references unknown station {sid!r}")
        series = flow_by_link.get(station.link_id)
        if series is None:
            raise ValueError(f"station {sid}: no flow series for link {station.link_id!r}")
        tasks.append((plan_, station, series, scen, evp, battery))

    rows: list[tuple] = []
    if jobs <= 1:
        for task in tasks:
            rows.extend(_worker(task))
    else:
        chunk = max(1, len(tasks) // (jobs * 8))
        with Pool(processes=jobs) as pool:
            for combo_rows in pool.imap(_worker, tasks, chunksize=chunk):
                rows.extend(combo_rows)
    return SweepResult(plan=plan_, header=plan_.header, rows=rows)


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # np scalars repr differently in numpy 2
    return str(value)


def write_results(result: SweepResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(result.header) + "\n")
        for row in result.rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def write_summary(result: SweepResult, path) -> None:
    """Aggregate by (scenario, evp, battery, plug count): the penetration-impact table."""
    idx = {name: i for i, name in enumerate(result.header)}
    prefix = "" if "o1_queue_veh" in idx else "des_"
    o1 = idx[prefix + "o1_queue_veh"]
    o2 = idx[prefix + "o2_wait_h"]
    o3 = idx[prefix + "o3_service_h"]
    energy = idx[("energy_kwh" if prefix == "" else "des_energy_kwh")]
    blocking = idx[("blocking_prob" if prefix == "" else "des_blocking_frac")]

    groups: dict[tuple, dict] = {}
    for row in result.rows:
        gkey = (row[idx["scenario"]], row[idx["evp_percent"]],
                row[idx["battery_kwh"]], row[idx["plugs"]])
        g = groups.setdefault(gkey, {"o1": 0.0, "o2": 0.0, "o3": 0.0, "blk": 0.0,
                                     "n": 0, "daily": {}})
        g["o1"] += row[o1]
        g["o2"] += row[o2]
        g["o3"] += row[o3]
        g["blk"] += row[blocking]
        g["n"] += 1
        sid = row[idx["station_id"]]
        g["daily"][sid] = g["daily"].get(sid, 0.0) + row[energy]

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("scenario,evp_percent,battery_kwh,plugs,n_stations,"
                 "mean_o1_queue_veh,mean_o2_wait_h,mean_o3_service_h,"
                 "mean_blocking,mean_daily_kwh,max_daily_kwh\n")
        for gkey in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
            g = groups[gkey]
            daily = list(g["daily"].values())
            fh.write(",".join([
                str(gkey[0]), repr(float(gkey[1])), repr(float(gkey[2])), str(gkey[3]),
                str(len(daily)),
                repr(g["o1"] / g["n"]), repr(g["o2"] / g["n"]), repr(g["o3"] / g["n"]),
                repr(g["blk"] / g["n"]),
                repr(sum(daily) / len(daily)), repr(max(daily)),
            ]) + "\n")
