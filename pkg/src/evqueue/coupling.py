"""Feeds station queues back into link travel times via a volume-delay curve.

Stands in for microsimulated spillback: cars waiting at a station occupy road
space on its link, shrinking effective capacity, and travel time follows a
BPR curve t = t0 * (1 + alpha * (v / c_eff)^beta). Network impact is the
total vehicle-hours (driving plus waiting at stations) relative to the same
network with every queue forced to zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import HOURS, HourlyFlowSeries, SchemaError, StationRegistry, _fmt, _parse_number, _read_rows

BPR_ALPHA = 0.15
BPR_BETA = 4.0
VEHICLE_LENGTH_KM = 0.007
CAPACITY_FLOOR_FRACTION = 0.05

LINK_HEADER = ["link_id", "free_flow_time_h", "capacity_vph", "length_km", "lanes"]


@dataclass(frozen=True)
class LinkSpec:
    """Road section carrying a station's feeding traffic."""

    link_id: str
    free_flow_time_h: float
    capacity_vph: float
    length_km: float
    lanes: int

    def __post_init__(self):
        if not self.link_id:
            raise ValueError("link_id must be non-empty")
        for name in ("free_flow_time_h", "capacity_vph", "length_km"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"link {self.link_id}: {name} must be > 0, got {v}")
        if not isinstance(self.lanes, int) or self.lanes < 1:
            raise ValueError(f"link {self.link_id}: lanes must be a positive integer, got {self.lanes}")


@dataclass(frozen=True)
class CongestionReport:
    """Network travel-time comparison between queued and queue-free states."""

    link_ids: tuple[str, ...]
    baseline_time_h: dict[str, np.ndarray]    # per link, 24 hourly link times
    with_queue_time_h: dict[str, np.ndarray]
    baseline_total_h: float                   # network vehicle-hours per day
    with_queue_total_h: float
    delta_percent: float
    ev_p: float | None = None


def load_links(path) -> list[LinkSpec]:
    path, _, rows = _read_rows(path, LINK_HEADER)
    out = []
    for lineno, row in rows:
        if len(row) != len(LINK_HEADER):
            raise SchemaError(f"expected {len(LINK_HEADER)} columns, got {len(row)}", path=path, line=lineno)
        link, t0_s, cap_s, len_s, lanes_s = (c.strip() for c in row)
        try:
            out.append(LinkSpec(
                link,
                _parse_number(t0_s, float, path, lineno, "free_flow_time_h"),
                _parse_number(cap_s, float, path, lineno, "capacity_vph"),
                _parse_number(len_s, float, path, lineno, "length_km"),
                _parse_number(lanes_s, int, path, lineno, "lanes"),
            ))
        except ValueError as exc:
            raise SchemaError(str(exc), path=path, line=lineno) from exc
    return out


def write_links(links: list[LinkSpec], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LINK_HEADER)
        for l in links:
            writer.writerow([l.link_id, _fmt(l.free_flow_time_h), _fmt(l.capacity_vph), _fmt(l.length_km), l.lanes])


def link_time(
    link: LinkSpec,
    volume_vph: float,
    stored_queue_veh: float,
    alpha: float = BPR_ALPHA,
    beta: float = BPR_BETA,
    vehicle_length_km: float = VEHICLE_LENGTH_KM,
    capacity_floor: float = CAPACITY_FLOOR_FRACTION,
) -> float:
    """Hourly link travel time under volume and station-queue spillback.

    Queued vehicles consume stored lane-length, scaling capacity down; the
    effective capacity never drops below the floor fraction.
    """
    if volume_vph < 0:
        raise ValueError(f"volume_vph must be >= 0, got {volume_vph}")
    if stored_queue_veh < 0:
        raise ValueError(f"stored_queue_veh must be >= 0, got {stored_queue_veh}")
    occupancy = stored_queue_veh * vehicle_length_km / (link.length_km * link.lanes)
    c_eff = link.capacity_vph * max(0.0, 1.0 - occupancy)
    c_eff = max(c_eff, capacity_floor * link.capacity_vph)
    return link.free_flow_time_h * (1.0 + alpha * (volume_vph / c_eff) ** beta)


def network_delta(
    links: list[LinkSpec],
    flows: list[HourlyFlowSeries],
    station_queues: dict[str, np.ndarray],
    registry: StationRegistry,
    ev_p: float | None = None,
    flow_scale: float = 1.0,
    **bpr_kwargs,
) -> CongestionReport:
    """Total network travel time with station queues versus without.

    station_queues maps station id to its 24 hourly mean queue lengths; the
    vehicles waiting there both occupy their station's link and contribute
    their own waiting hours. Zero queues reproduce the baseline exactly, so
    the delta is identically 0 in that case.
    """
    link_by_id = {l.link_id: l for l in links}
    flow_by_id = {f.link_id: f for f in flows}

    queue_on_link: dict[str, np.ndarray] = {}
    waiting_hours = 0.0
    for sid, q in station_queues.items():
        q = np.asarray(q, dtype=float)
        if q.shape != (HOURS,):
            raise ValueError(f"station {sid}: queue series must have {HOURS} entries")
        station = registry.get(sid)  # KeyError on unknown station
        if station.link_id not in link_by_id:
            raise ValueError(f"station {sid} references unknown link {station.link_id!r}")
        acc = queue_on_link.setdefault(station.link_id, np.zeros(HOURS))
        acc += q
        waiting_hours += float(q.sum())  # mean queue x 1 h each

    base_times: dict[str, np.ndarray] = {}
    with_times: dict[str, np.ndarray] = {}
    base_total = 0.0
    with_total = 0.0
    for l in links:
        series = flow_by_id.get(l.link_id)
        if series is None:
            raise ValueError(f"no flow series for link {l.link_id!r}")
        volumes = np.asarray(series.flows) * flow_scale
        queues = queue_on_link.get(l.link_id, np.zeros(HOURS))
        bt = np.array([link_time(l, v, 0.0, **bpr_kwargs) for v in volumes])
        wt = np.array([link_time(l, v, q, **bpr_kwargs) for v, q in zip(volumes, queues)])
        base_times[l.link_id] = bt
        with_times[l.link_id] = wt
        base_total += float(np.dot(volumes, bt))
        with_total += float(np.dot(volumes, wt))

    with_total += waiting_hours
    delta = 100.0 * (with_total - base_total) / base_total if base_total > 0 else 0.0
    return CongestionReport(
        link_ids=tuple(l.link_id for l in links),
        baseline_time_h=base_times,
        with_queue_time_h=with_times,
        baseline_total_h=base_total,
        with_queue_total_h=with_total,
        delta_percent=delta,
        ev_p=ev_p,
    )
