"""Energy aggregation across stations and comparison with a grid load profile."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HOURS, GridProfile
from .des import SimResult
from .queueing import QueueSolution


def station_energy(queue_output, session_kwh: float | None = None) -> np.ndarray:
    """Hourly station energy in kWh.

    Accepts a SimResult (delivered session energy, already hourly) or a
    24-long sequence of QueueSolution (one per hour), where the hourly energy
    is the admitted-arrival rate times the mean per-session energy. For the
    analytic path session_kwh overrides the solution's own per-session value,
    which is needed when the per-session energy comes from the SoC draw
    rather than from a full-hour charge.
    """
    if isinstance(queue_output, SimResult):
        return np.asarray(queue_output.hourly_energy_kwh, dtype=float).copy()
    solutions = list(queue_output)
    if len(solutions) != HOURS:
        raise ValueError(f"expected {HOURS} hourly solutions, got {len(solutions)}")
    out = np.empty(HOURS)
    for h, sol in enumerate(solutions):
        if not isinstance(sol, QueueSolution):
            raise TypeError(f"hour {h}: expected QueueSolution, got {type(sol).__name__}")
        per_session = session_kwh if session_kwh is not None else sol.energy_per_session_kwh
        out[h] = sol.effective_arrival_rate * per_session
    return out


@dataclass(frozen=True)
class PlugCountEnergyRow:
    """Daily station energy statistics for one (plug count, ev_p, scenario) group."""

    scenario: str
    evp_percent: float
    battery_kwh: float
    plugs: int
    n_stations: int
    mean_daily_kwh: float
    max_daily_kwh: float


def energy_vs_plugs(rows) -> list[PlugCountEnergyRow]:
    """Group sweep rows into daily station energy by plug count and ev_p.

    rows are sweep result mappings with keys scenario, evp_percent,
    battery_kwh, station_id, plugs, hour, energy_kwh (the sweep module's
    detailed output). Daily energy is the 24-hour sum per station.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("empty sweep results")
    daily: dict[tuple, float] = {}
    plugs_of: dict[tuple, int] = {}
    for r in rows:
        key = (r["scenario"], float(r["evp_percent"]), float(r["battery_kwh"]), r["station_id"])
        daily[key] = daily.get(key, 0.0) + float(r["energy_kwh"])
        plugs_of[key] = int(r["plugs"])

    grouped: dict[tuple, list[float]] = {}
    for key, kwh in daily.items():
        scenario, evp, battery, _sid = key
        gkey = (scenario, evp, battery, plugs_of[key])
        grouped.setdefault(gkey, []).append(kwh)

    out = []
    for (scenario, evp, battery, plugs), values in sorted(grouped.items()):
        out.append(PlugCountEnergyRow(
            scenario=scenario, evp_percent=evp, battery_kwh=battery, plugs=plugs,
            n_stations=len(values),
            mean_daily_kwh=float(np.mean(values)),
            max_daily_kwh=float(np.max(values)),
        ))
    return out


@dataclass(frozen=True)
class CoincidenceReport:
    """How charging demand lines up with the grid's own peak."""

    state_peak_hours: tuple[int, ...]   # argmax hours of the grid profile
    ratio: float                        # charging at first grid peak / charging daily peak
    grid_normalized: np.ndarray         # both profiles scaled to their own max
    charging_normalized: np.ndarray


def grid_coincidence(charging_profile, grid: GridProfile) -> CoincidenceReport:
    """Compare a 24-hour charging profile against a grid demand profile.

    The ratio is the charging level at the grid's peak hour divided by the
    charging profile's own daily peak; ties in the grid peak resolve to the
    earliest hour and the full tie set is reported.
    """
    charging = np.asarray(charging_profile, dtype=float)
    if charging.shape != (HOURS,):
        raise ValueError(f"charging profile must have {HOURS} entries, got {charging.shape}")
    if not np.all(np.isfinite(charging)) or np.any(charging < 0):
        raise ValueError("charging profile entries must be finite and >= 0")
    c_peak = charging.max()
    if c_peak <= 0:
        raise ValueError("charging profile is all zero")
    grid_vals = np.asarray(grid.hourly_mw, dtype=float)
    g_peak = grid_vals.max()
    peak_hours = tuple(int(h) for h in np.flatnonzero(grid_vals == g_peak))
    ratio = float(charging[peak_hours[0]] / c_peak)
    return CoincidenceReport(
        state_peak_hours=peak_hours,
        ratio=ratio,
        grid_normalized=grid_vals / g_peak,
        charging_normalized=charging / c_peak,
    )


def write_energy_by_station(daily_kwh_by_station: dict[str, float], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("station_id,daily_kwh\n")
        for sid in sorted(daily_kwh_by_station):
            fh.write(f"{sid},{float(daily_kwh_by_station[sid])!r}\n")


def write_energy_by_plugcount(rows: list[PlugCountEnergyRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("scenario,evp_percent,battery_kwh,plugs,n_stations,mean_daily_kwh,max_daily_kwh\n")
        for r in rows:
            fh.write(
                f"{r.scenario},{r.evp_percent!r},{r.battery_kwh!r},{r.plugs},"
                f"{r.n_stations},{r.mean_daily_kwh!r},{r.max_daily_kwh!r}\n"
            )


def write_grid_overlay(report: CoincidenceReport, path) -> None:
    """Overlay CSV: hour, grid_norm, charging_norm, coincidence ratio column."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("hour,grid_norm,charging_norm,coincidence_ratio\n")
        for h in range(HOURS):
            fh.write(
                f"{h},{float(report.grid_normalized[h])!r},"
                f"{float(report.charging_normalized[h])!r},{float(report.ratio)!r}\n"
            )
