"""Domain types, configuration, and CSV/JSON ingestion shared by all modules."""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path


class SchemaError(Exception):
    """A data file does not conform to its schema. Carries path and line context."""

    def __init__(self, message, path=None, line=None):
        ctx = ""
        if path is not None:
            ctx += f"{path}"
        if line is not None:
            ctx += f":{line}"
        super().__init__(f"{ctx}: {message}" if ctx else message)
        self.path = path
        self.line = line


class DemandScenario(enum.Enum):
    """Traffic demand scenario: observed 2016 flows or uniform +15% / +30% growth."""

    OD2016 = 1.0
    OD15 = 1.15
    OD30 = 1.30

    @property
    def scale(self) -> float:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "DemandScenario":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(
                f"unknown demand scenario {name!r}; expected one of "
                f"{', '.join(s.name for s in cls)}"
            ) from None


HOURS = 24
HOUR_COLS = [f"h{h:02d}" for h in range(HOURS)]
AVG_D_COLS = [f"avg_d_km_h{h:02d}" for h in range(HOURS)]


@dataclass(frozen=True)
class Station:
    """A charging site: plug count, charger power, waiting capacity, link association."""

    id: str
    plugs: int
    charger_power_kw: float
    waiting_slots: int
    link_id: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("station id must be non-empty")
        if not isinstance(self.plugs, int) or self.plugs < 1:
            raise ValueError(f"station {self.id}: plugs must be a positive integer, got {self.plugs}")
        if not (self.charger_power_kw > 0 and math.isfinite(self.charger_power_kw)):
            raise ValueError(f"station {self.id}: charger_power_kw must be > 0, got {self.charger_power_kw}")
        if not isinstance(self.waiting_slots, int) or self.waiting_slots < 0:
            raise ValueError(f"station {self.id}: waiting_slots must be a non-negative integer, got {self.waiting_slots}")
        if not self.link_id:
            raise ValueError(f"station {self.id}: link_id must be non-empty")

    @property
    def capacity(self) -> int:
        """Total car slots (charging + waiting)."""
        return self.plugs + self.waiting_slots


@dataclass(frozen=True)
class StationRegistry:
    """Ordered, id-unique collection of stations."""

    stations: tuple[Station, ...]

    def __post_init__(self):
        seen = set()
        for s in self.stations:
            if s.id in seen:
                raise ValueError(f"duplicate station id {s.id!r}")
            seen.add(s.id)

    def __len__(self):
        return len(self.stations)

    def __iter__(self):
        return iter(self.stations)

    def get(self, station_id: str) -> Station:
        for s in self.stations:
            if s.id == station_id:
                return s
        raise KeyError(station_id)

    def plug_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for s in self.stations:
            hist[s.plugs] = hist.get(s.plugs, 0) + 1
        return dict(sorted(hist.items()))


@dataclass(frozen=True)
class HourlyFlowSeries:
    """Per-link vehicle flow for each hour of the day, optionally with mean trip distance."""

    link_id: str
    flows: tuple[float, ...]
    avg_d_km: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.link_id:
            raise ValueError("link_id must be non-empty")
        if len(self.flows) != HOURS:
            raise ValueError(f"link {self.link_id}: expected {HOURS} hourly flows, got {len(self.flows)}")
        for h, v in enumerate(self.flows):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"link {self.link_id}: flow at hour {h} must be finite and >= 0, got {v}")
        if self.avg_d_km is not None:
            if len(self.avg_d_km) != HOURS:
                raise ValueError(f"link {self.link_id}: expected {HOURS} avg_d_km entries, got {len(self.avg_d_km)}")
            for h, v in enumerate(self.avg_d_km):
                if not (math.isfinite(v) and v > 0):
                    raise ValueError(f"link {self.link_id}: avg_d_km at hour {h} must be finite and > 0, got {v}")


@dataclass(frozen=True)
class ChargeRequest:
    """One vehicle's charging demand: when it arrives and how much energy it wants."""

    arrival_time_h: float
    recharge_fraction: float
    battery_kwh: float

    def __post_init__(self):
        if not (0 < self.recharge_fraction <= 1):
            raise ValueError(f"recharge_fraction must be in (0, 1], got {self.recharge_fraction}")
        if not (self.battery_kwh > 0):
            raise ValueError(f"battery_kwh must be > 0, got {self.battery_kwh}")

    @property
    def energy_kwh(self) -> float:
        """Energy delivered by the session."""
        return self.recharge_fraction * self.battery_kwh


@dataclass(frozen=True)
class GridProfile:
    """A labelled 24-hour electricity demand profile in MW."""

    label: str
    hourly_mw: tuple[float, ...]

    def __post_init__(self):
        if len(self.hourly_mw) != HOURS:
            raise ValueError(f"profile {self.label!r}: expected {HOURS} entries, got {len(self.hourly_mw)}")
        for h, v in enumerate(self.hourly_mw):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"profile {self.label!r}: value at hour {h} must be finite and >= 0, got {v}")
        if not any(v > 0 for v in self.hourly_mw):
            raise ValueError(f"profile {self.label!r}: all entries are zero")


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of the sweep grid."""

    demand_scenario: DemandScenario
    ev_p: float  # fraction, not percent
    battery_kwh: float
    hour: int
    seed: int

    def __post_init__(self):
        if not (0 < self.ev_p <= 1):
            raise ValueError(f"ev_p must be a fraction in (0, 1], got {self.ev_p}")
        if not (self.battery_kwh > 0):
            raise ValueError(f"battery_kwh must be > 0, got {self.battery_kwh}")
        if not (0 <= self.hour < HOURS):
            raise ValueError(f"hour must be in 0..{HOURS - 1}, got {self.hour}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in 64 bits")


def _default_evp_grid_percent() -> tuple[float, ...]:
    # 0.01..0.05 and 0.10..0.30 in hundredths, plus the enumerated high values
    low = [i / 100 for i in range(1, 6)]
    mid = [i / 100 for i in range(10, 31)]
    return tuple(low + mid + [0.5, 1.0, 2.0, 5.0])


DEFAULT_BATTERY_GRID_KWH = (50.0, 58.0, 66.0, 74.0, 82.0, 90.0, 98.0, 106.0)


@dataclass(frozen=True)
class Config:
    """Global configuration; JSON-serializable. All knobs have working defaults."""

    waiting_slots_default: int = 10
    soc_mean: float = 0.5
    soc_sd: float = 0.1
    soc_bounds: tuple[float, float] = (0.2, 0.8)
    battery_grid_kwh: tuple[float, ...] = DEFAULT_BATTERY_GRID_KWH
    evp_grid_percent: tuple[float, ...] = field(default_factory=_default_evp_grid_percent)
    demand_scenarios: tuple[str, ...] = ("OD2016", "OD15", "OD30")
    arrival_cv: float = 0.2
    seed: int = 12345
    # volume-delay constants (see coupling module)
    bpr_alpha: float = 0.15
    bpr_beta: float = 4.0
    vehicle_length_km: float = 0.007
    capacity_floor_fraction: float = 0.05

    def __post_init__(self):
        if self.waiting_slots_default < 0:
            raise ValueError("waiting_slots_default must be >= 0")
        lo, hi = self.soc_bounds
        if not (0 < lo <= hi <= 1):
            raise ValueError(f"soc_bounds must satisfy 0 < lo <= hi <= 1, got {self.soc_bounds}")
        if not (lo <= self.soc_mean <= hi):
            raise ValueError(f"soc_mean {self.soc_mean} outside soc_bounds {self.soc_bounds}")
        if self.soc_sd < 0:
            raise ValueError("soc_sd must be >= 0")
        if not self.battery_grid_kwh:
            raise ValueError("battery_grid_kwh must be non-empty")
        if any(b <= 0 for b in self.battery_grid_kwh):
            raise ValueError("battery_grid_kwh entries must be > 0")
        if not self.evp_grid_percent:
            raise ValueError("evp_grid_percent must be non-empty")
        if any(not 0 < p <= 100 for p in self.evp_grid_percent):
            raise ValueError("evp_grid_percent entries must be in (0, 100]")
        if not self.demand_scenarios:
            raise ValueError("demand_scenarios must be non-empty")
        for name in self.demand_scenarios:
            DemandScenario.parse(name)
        if not (0 <= self.arrival_cv <= 0.5):
            raise ValueError(f"arrival_cv must be in [0, 0.5], got {self.arrival_cv}")

    @classmethod
    def from_file(cls, path) -> "Config":
        """Load a JSON config; unknown keys are rejected by name."""
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}", path=path) from exc
        if not isinstance(raw, dict):
            raise SchemaError("config root must be a JSON object", path=path)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}", path=path)
        kwargs = dict(raw)
        for key in ("soc_bounds", "battery_grid_kwh", "evp_grid_percent", "demand_scenarios"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise SchemaError(str(exc), path=path) from exc

    def to_file(self, path) -> None:
        doc = dataclasses.asdict(self)
        doc = {k: list(v) if isinstance(v, tuple) else v for k, v in doc.items()}
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# CSV ingestion
#
# stations:     id,plugs,charger_power_kw,waiting_slots,link_id
# flows:        link_id,h00,...,h23            (optionally + avg_d_km_h00..h23)
# grid profile: label,h00,...,h23              (MW)
# ---------------------------------------------------------------------------

STATION_HEADER = ["id", "plugs", "charger_power_kw", "waiting_slots", "link_id"]


def _read_rows(path, expected_header):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file, header required", path=path) from None
        header = [c.strip() for c in header]
        if expected_header is not None and header != expected_header:
            raise SchemaError(
                f"bad header {header}, expected {expected_header}", path=path, line=1
            )
        rows = [(lineno, row) for lineno, row in enumerate(reader, start=2) if row]
    return path, header, rows


def _parse_number(text, kind, path, line, column):
    try:
        if kind is int:
            return int(text)
        return float(text)
    except ValueError:
        raise SchemaError(
            f"column {column!r}: cannot parse {text!r} as {kind.__name__}",
            path=path, line=line,
        ) from None


def load_station_registry(path, waiting_slots_default: int = 10) -> StationRegistry:
    """Load a station CSV. An empty waiting_slots cell takes the default."""
    path, _, rows = _read_rows(path, STATION_HEADER)
    stations = []
    for lineno, row in rows:
        if len(row) != len(STATION_HEADER):
            raise SchemaError(
                f"expected {len(STATION_HEADER)} columns, got {len(row)}",
                path=path, line=lineno,
            )
        sid, plugs_s, power_s, slots_s, link = (c.strip() for c in row)
        plugs = _parse_number(plugs_s, int, path, lineno, "plugs")
        power = _parse_number(power_s, float, path, lineno, "charger_power_kw")
        slots = (
            waiting_slots_default
            if slots_s == ""
            else _parse_number(slots_s, int, path, lineno, "waiting_slots")
        )
        try:
            stations.append(Station(sid, plugs, power, slots, link))
        except ValueError as exc:
            raise SchemaError(str(exc), path=path, line=lineno) from exc
    try:
        return StationRegistry(tuple(stations))
    except ValueError as exc:
        raise SchemaError(str(exc), path=path) from exc


def write_station_registry(registry: StationRegistry, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATION_HEADER)
        for s in registry:
            writer.writerow([s.id, s.plugs, _fmt(s.charger_power_kw), s.waiting_slots, s.link_id])


def load_flows(path) -> list[HourlyFlowSeries]:
    """Load a flow CSV: 25-column base schema or 49-column variant with avg_d_km."""
    base = ["link_id"] + HOUR_COLS
    extended = base + AVG_D_COLS
    path, header, rows = _read_rows(path, None)
    if header == base:
        has_avg_d = False
    elif header == extended:
        has_avg_d = True
    else:
        raise SchemaError(
            f"bad header: expected {len(base)} columns (link_id,h00..h23) "
            f"or {len(extended)} with avg_d_km_h00..h23, got {len(header)}",
            path=path, line=1,
        )
    out = []
    ncols = len(extended) if has_avg_d else len(base)
    for lineno, row in rows:
        if len(row) != ncols:
            raise SchemaError(f"expected {ncols} columns, got {len(row)}", path=path, line=lineno)
        link = row[0].strip()
        flows = tuple(
            _parse_number(row[1 + h].strip(), float, path, lineno, HOUR_COLS[h])
            for h in range(HOURS)
        )
        avg_d = None
        if has_avg_d:
            avg_d = tuple(
                _parse_number(row[1 + HOURS + h].strip(), float, path, lineno, AVG_D_COLS[h])
                for h in range(HOURS)
            )
        try:
            out.append(HourlyFlowSeries(link, flows, avg_d))
        except ValueError as exc:
            raise SchemaError(str(exc), path=path, line=lineno) from exc
    return out


def write_flows(series: list[HourlyFlowSeries], path) -> None:
    has_avg_d = any(s.avg_d_km is not None for s in series)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["link_id"] + HOUR_COLS + (AVG_D_COLS if has_avg_d else []))
        for s in series:
            row = [s.link_id] + [_fmt(v) for v in s.flows]
            if has_avg_d:
                avg_d = s.avg_d_km or (float("nan"),) * HOURS
                row += [_fmt(v) for v in avg_d]
            writer.writerow(row)


def load_grid_profiles(path) -> list[GridProfile]:
    path, _, rows = _read_rows(path, ["label"] + HOUR_COLS)
    out = []
    for lineno, row in rows:
        if len(row) != 1 + HOURS:
            raise SchemaError(f"expected {1 + HOURS} columns, got {len(row)}", path=path, line=lineno)
        values = tuple(
            _parse_number(row[1 + h].strip(), float, path, lineno, HOUR_COLS[h])
            for h in range(HOURS)
        )
        try:
            out.append(GridProfile(row[0].strip(), values))
        except ValueError as exc:
            raise SchemaError(str(exc), path=path, line=lineno) from exc
    if not out:
        raise SchemaError("no profiles in file", path=path)
    return out


def _fmt(value: float) -> str:
    """Shortest round-trip float formatting; integral values stay integral-looking."""
    return repr(float(value))
