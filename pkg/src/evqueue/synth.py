"""Deterministic generation of the bundled synthetic dataset.

The bundled network mirrors the published layout of the North Sydney
fast-charging fleet (25 stations at 22 kW; seven single-plug sites, ten with
two plugs, two with three, three with four, and one each with 7, 9 and 10
plugs) but every flow volume, link geometry and detector-to-station mapping
here is synthetic and labelled as such. Daily flow shapes are AM/PM bimodal;
the grid profile is an evening-peaked state-scale load curve.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .core import (
    GridProfile,
    HourlyFlowSeries,
    Station,
    StationRegistry,
    write_flows,
    write_station_registry,
)
from .coupling import LinkSpec, write_links

DEFAULT_SYNTH_SEED = 7

# (plugs, daily peak flow veh/h) per station, in registry order
_STATION_LAYOUT = (
    (1, 1350), (2, 1200), (2, 1800), (1, 2100), (4, 3000),
    (2, 2400), (1, 3000), (10, 2250), (2, 3000), (3, 2700),
    (1, 3900), (2, 3600), (7, 6300), (2, 4200), (1, 1650),
    (4, 4200), (2, 1500), (3, 3900), (1, 2550), (9, 3000),
    (2, 2100), (4, 5400), (2, 2700), (1, 3450), (2, 3300),
)

CHARGER_POWER_KW = 22.0
WAITING_SLOTS = 10

# daily flow shape: baseline plus morning and evening commute bumps
_SHAPE_BASE = 0.10
_AM_PEAK_H, _AM_WEIGHT, _AM_WIDTH = 8.0, 0.80, 1.6
_PM_PEAK_H, _PM_WEIGHT, _PM_WIDTH = 17.5, 1.00, 1.9

# state grid profile (MW): overnight trough, midday plateau, evening peak
_GRID_BASE_MW = 7600.0
_GRID_DAY_MW, _GRID_DAY_H, _GRID_DAY_WIDTH = 900.0, 11.0, 4.0
_GRID_EVE_MW, _GRID_EVE_H, _GRID_EVE_WIDTH = 4200.0, 18.3, 2.1

GRID_PROFILE_LABEL = "state_weekday_synthetic"


def _bump(hours, center, width):
    return np.exp(-0.5 * ((hours - center) / width) ** 2)


def daily_flow_shape() -> np.ndarray:
    """Normalized (max 1) bimodal hour-of-day flow profile at bin centers."""
    h = np.arange(24) + 0.5
    shape = (
        _SHAPE_BASE
        + _AM_WEIGHT * _bump(h, _AM_PEAK_H, _AM_WIDTH)
        + _PM_WEIGHT * _bump(h, _PM_PEAK_H, _PM_WIDTH)
    )
    return shape / shape.max()


def stations_like_paper() -> StationRegistry:
    """The bundled 25-station registry with its published plug distribution."""
    stations = tuple(
        Station(
            id=f"NS{i + 1:02d}",
            plugs=plugs,
            charger_power_kw=CHARGER_POWER_KW,
            waiting_slots=WAITING_SLOTS,
            link_id=f"L{i + 1:02d}",
        )
        for i, (plugs, _peak) in enumerate(_STATION_LAYOUT)
    )
    return StationRegistry(stations)


def synthetic_flows() -> list[HourlyFlowSeries]:
    """One bimodal flow series per station link, scaled by its peak volume."""
    shape = daily_flow_shape()
    out = []
    for i, (_plugs, peak) in enumerate(_STATION_LAYOUT):
        flows = tuple(round(peak * s, 3) for s in shape)
        out.append(HourlyFlowSeries(link_id=f"L{i + 1:02d}", flows=flows))
    return out


def synthetic_links(seed: int = DEFAULT_SYNTH_SEED) -> list[LinkSpec]:
    """Link geometry for each station's feeding road section."""
    rng = np.random.default_rng(seed)
    links = []
    for i, (_plugs, peak) in enumerate(_STATION_LAYOUT):
        length_km = round(float(rng.uniform(3.5, 11.0)), 3)
        speed_kmh = round(float(rng.uniform(45.0, 65.0)), 1)
        lanes = int(np.clip(round(peak / 950.0), 2, 6))
        links.append(LinkSpec(
            link_id=f"L{i + 1:02d}",
            free_flow_time_h=round(length_km / speed_kmh, 6),
            capacity_vph=950.0 * lanes,
            length_km=length_km,
            lanes=lanes,
        ))
    return links


def synthetic_grid_profile() -> GridProfile:
    h = np.arange(24) + 0.5
    mw = (
        _GRID_BASE_MW
        + _GRID_DAY_MW * _bump(h, _GRID_DAY_H, _GRID_DAY_WIDTH)
        + _GRID_EVE_MW * _bump(h, _GRID_EVE_H, _GRID_EVE_WIDTH)
    )
    return GridProfile(GRID_PROFILE_LABEL, tuple(round(float(v), 1) for v in mw))


STATIONS_FILENAME = "stations_north_sydney.csv"
FLOWS_FILENAME = "flows_synthetic.csv"
LINKS_FILENAME = "links_synthetic.csv"
GRID_FILENAME = "grid_profile_synthetic.csv"
CONFIG_FILENAME = "default_config.json"


def write_dataset(out_dir, seed: int = DEFAULT_SYNTH_SEED) -> dict[str, Path]:
    """Emit the full synthetic dataset; returns name -> written path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "stations": out_dir / STATIONS_FILENAME,
        "flows": out_dir / FLOWS_FILENAME,
        "links": out_dir / LINKS_FILENAME,
        "grid": out_dir / GRID_FILENAME,
    }
    write_station_registry(stations_like_paper(), paths["stations"])
    write_flows(synthetic_flows(), paths["flows"])
    write_links(synthetic_links(seed), paths["links"])
    profile = synthetic_grid_profile()
    with open(paths["grid"], "w", encoding="utf-8") as fh:
        fh.write("label," + ",".join(f"h{h:02d}" for h in range(24)) + "\n")
        fh.write(profile.label + "," + ",".join(repr(v) for v in profile.hourly_mw) + "\n")
    return paths


def bundled_path(filename: str) -> Path:
    """Path to a data file shipped inside the package."""
    return Path(resources.files("evqueue").joinpath("data", filename))
