"""Command-line entry point: solve, simulate, sweep, couple, grid, synth.

Thin orchestration only; all modelling lives in the library modules. ev_p is
given in percent on every flag and file surface and converted to a fraction
at this boundary. Exit codes: 0 ok, 2 usage/validation, 3 data, 4 internal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
import traceback
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    HOURS,
    Config,
    DemandScenario,
    SchemaError,
    load_flows,
    load_grid_profiles,
    load_station_registry,
)
from .coupling import link_time, load_links, network_delta
from .demand import ArrivalModel, SocSampler, arrival_rates, truncated_mean
from .des import HOURLY_METRICS, SCALAR_METRICS, SimConfig, replicate, simulate, write_trace
from .energy import grid_coincidence, write_grid_overlay
from .queueing import QueueParams, solve
from .sweep import plan as sweep_plan
from .sweep import run as sweep_run
from .sweep import write_results, write_summary
from .synth import write_dataset

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir, command, args, inputs, outputs, started, extra=None):
    doc = {
        "command": command,
        "argv": [a for a in (args if isinstance(args, list) else sys.argv[1:])],
        "package_version": __version__,
        "python": platform.python_version(),
        "started_utc": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
        "wall_time_s": round(time.time() - started, 3),
        "inputs": {name: {"path": str(p), "sha256": _sha256(p)} for name, p in inputs.items()},
        "outputs": {name: {"path": str(p), "sha256": _sha256(p)} for name, p in outputs.items()},
    }
    if extra:
        doc.update(extra)
    path = Path(out_dir) / "run_manifest.json"
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def _load_config(args) -> Config:
    path = getattr(args, "config", None) or os.environ.get("EVQ_CONFIG")
    return Config.from_file(path) if path else Config()


def _evp_fraction(parser, percent: float) -> float:
    if not (0 < percent <= 100):
        parser.error(f"--evp must be a percent in (0, 100], got {percent}")
    return percent / 100.0


def _require(parser, args, names):
    missing = [n for n in names if getattr(args, n.lstrip("-").replace("-", "_")) is None]
    if missing:
        parser.error(f"missing required flags for this mode: {' '.join(missing)}")


# ---------------------------------------------------------------- solve ----

def _cmd_solve(parser, args, argv) -> int:
    config = _load_config(args)
    if args.station is not None:
        _require(parser, args, ["--stations", "--flows", "--hour", "--evp"])
        registry = load_station_registry(args.stations, config.waiting_slots_default)
        flows = {f.link_id: f for f in load_flows(args.flows)}
        station = registry.get(args.station)
        series = flows.get(station.link_id)
        if series is None:
            raise SchemaError(f"no flow series for link {station.link_id!r}", path=args.flows)
        if not (0 <= args.hour < HOURS):
            parser.error(f"--hour must be in 0..{HOURS - 1}, got {args.hour}")
        evp = _evp_fraction(parser, args.evp)
        scenario = DemandScenario.parse(args.scenario)
        model = arrival_rates(series, evp, scenario, station_id=station.id,
                              jitter_cv=config.arrival_cv)
        soc = SocSampler.from_config(config)
        battery = args.battery
        params = QueueParams(
            arrival_rate=model.hourly_rate[args.hour],
            mean_service_time_h=truncated_mean(soc) * battery / station.charger_power_kw,
            servers=station.plugs,
            capacity=station.capacity,
            charger_power_kw=station.charger_power_kw,
        )
    else:
        for flag, value in (("--lambda", args.arrival_rate), ("--service-h", args.service_h),
                            ("--plugs", args.plugs), ("--capacity", args.capacity)):
            if value is None:
                parser.error(f"{flag} is required (or use --station with data files)")
        if args.arrival_rate < 0:
            parser.error(f"--lambda must be >= 0, got {args.arrival_rate}")
        if args.service_h <= 0:
            parser.error(f"--service-h must be > 0, got {args.service_h}")
        if args.plugs < 1:
            parser.error(f"--plugs must be >= 1, got {args.plugs}")
        if args.capacity < args.plugs:
            parser.error(f"--capacity must be >= --plugs, got {args.capacity}")
        if args.power_kw <= 0:
            parser.error(f"--power-kw must be > 0, got {args.power_kw}")
        params = QueueParams(
            arrival_rate=args.arrival_rate, mean_service_time_h=args.service_h,
            servers=args.plugs, capacity=args.capacity, charger_power_kw=args.power_kw,
        )

    sol = solve(params)
    print(f"arrival rate:            {params.arrival_rate:.6g} veh/h")
    print(f"offered load:            {sol.offered_load:.6g} Erlang")
    print(f"O1 mean queue:           {sol.mean_queue:.6g} veh")
    print(f"O2 mean wait:            {sol.mean_wait_h:.6g} h")
    print(f"O3 mean service time:    {sol.mean_service_h:.6g} h")
    print(f"O4 mean total time:      {sol.mean_total_time_h:.6g} h")
    print(f"O5 energy per session:   {sol.energy_per_session_kwh:.6g} kWh")
    print(f"blocking probability:    {sol.blocking_prob:.6g}")
    print(f"effective arrival rate:  {sol.effective_arrival_rate:.6g} veh/h")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("arrival_rate_vph,offered_load_erl,o1_queue_veh,o2_wait_h,"
                     "o3_service_h,o4_total_h,o5_session_kwh,blocking_prob,"
                     "effective_rate_vph\n")
            fh.write(",".join(repr(v) for v in (
                params.arrival_rate, sol.offered_load, sol.mean_queue, sol.mean_wait_h,
                sol.mean_service_h, sol.mean_total_time_h, sol.energy_per_session_kwh,
                sol.blocking_prob, sol.effective_arrival_rate,
            )) + "\n")
    return 0


# ------------------------------------------------------------- simulate ----

def _cmd_simulate(parser, args, argv) -> int:
    started = time.time()
    config = _load_config(args)
    registry = load_station_registry(args.stations, config.waiting_slots_default)
    flows = {f.link_id: f for f in load_flows(args.flows)}
    station = registry.get(args.station)
    series = flows.get(station.link_id)
    if series is None:
        raise SchemaError(f"no flow series for link {station.link_id!r}", path=args.flows)
    evp = _evp_fraction(parser, args.evp)
    scenario = DemandScenario.parse(args.scenario)
    model = arrival_rates(series, evp, scenario, station_id=station.id,
                          jitter_cv=config.arrival_cv)
    soc = SocSampler.from_config(config)
    seed = args.seed if args.seed is not None else config.seed
    sim_config = SimConfig(
        station=station, arrivals=model, soc=soc, battery_kwh=args.battery,
        horizon_h=args.horizon, warmup_h=args.warmup, replication_seed=seed,
        inter_arrival=args.inter_arrival, collect_trace=args.trace is not None,
    )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {}
    if args.trace is not None and args.reps >= 2:
        parser.error("--trace is only available for single-replication runs (--reps 1)")
    if args.reps >= 2:
        summary = replicate(sim_config, args.reps)
        hourly_path = out_dir / "sim_hourly.csv"
        with open(hourly_path, "w", encoding="utf-8") as fh:
            fh.write("hour," + ",".join(f"{m},{m}_hw" for m in HOURLY_METRICS) + "\n")
            for h in range(HOURS):
                cells = [str(h)]
                for m in HOURLY_METRICS:
                    cells += [repr(float(summary.mean[m][h])), repr(float(summary.halfwidth[m][h]))]
                fh.write(",".join(cells) + "\n")
        summary_path = out_dir / "sim_summary.csv"
        with open(summary_path, "w", encoding="utf-8") as fh:
            fh.write("metric,mean,halfwidth_95\n")
            for m in SCALAR_METRICS:
                fh.write(f"{m},{summary.mean[m]!r},{summary.halfwidth[m]!r}\n")
        outputs = {"sim_hourly": hourly_path, "sim_summary": summary_path}
    else:
        result = simulate(sim_config)
        hourly_path = out_dir / "sim_hourly.csv"
        with open(hourly_path, "w", encoding="utf-8") as fh:
            fh.write("hour," + ",".join(HOURLY_METRICS) + "\n")
            for h in range(HOURS):
                fh.write(",".join([str(h)] + [repr(float(getattr(result, m)[h])) for m in HOURLY_METRICS]) + "\n")
        summary_path = out_dir / "sim_summary.csv"
        with open(summary_path, "w", encoding="utf-8") as fh:
            fh.write("metric,value\n")
            for m in SCALAR_METRICS:
                fh.write(f"{m},{float(getattr(result, m))!r}\n")
        outputs = {"sim_hourly": hourly_path, "sim_summary": summary_path}
        if args.trace is not None:
            write_trace(result.trace, args.trace, station.id)
            outputs["trace"] = Path(args.trace)

    manifest = _write_manifest(
        out_dir, "simulate", argv,
        inputs={"stations": Path(args.stations), "flows": Path(args.flows)},
        outputs=outputs, started=started,
        extra={"seed": seed, "evp": {"percent": args.evp, "fraction": evp},
               "station": station.id, "battery_kwh": args.battery,
               "scenario": args.scenario, "reps": args.reps},
    )
    print(f"wrote {', '.join(str(p) for p in outputs.values())} and {manifest}")
    return 0


# ---------------------------------------------------------------- sweep ----

def _cmd_sweep(parser, args, argv) -> int:
    started = time.time()
    config = _load_config(args)
    registry = load_station_registry(args.stations, config.waiting_slots_default)
    flows = load_flows(args.flows)
    plan_ = sweep_plan(config, registry, mode=args.mode, master_seed=args.seed)
    result = sweep_run(plan_, registry, flows, jobs=args.jobs)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "sweep_results.csv"
    summary_path = out_dir / "sweep_summary.csv"
    write_results(result, results_path)
    write_summary(result, summary_path)
    inputs = {"stations": Path(args.stations), "flows": Path(args.flows)}
    if args.config:
        inputs["config"] = Path(args.config)
    manifest = _write_manifest(
        out_dir, "sweep", argv, inputs=inputs,
        outputs={"sweep_results": results_path, "sweep_summary": summary_path},
        started=started,
        extra={"mode": args.mode, "master_seed": plan_.master_seed,
               "cells": plan_.cell_count, "jobs": args.jobs},
    )
    print(f"evaluated {plan_.cell_count} cells -> {results_path}, {summary_path}, {manifest}")
    return 0


# ---------------------------------------------------------------- couple ---

def _cmd_couple(parser, args, argv) -> int:
    started = time.time()
    config = _load_config(args)
    registry = load_station_registry(args.stations, config.waiting_slots_default)
    flows = load_flows(args.flows)
    links = load_links(args.links)
    flow_by_link = {f.link_id: f for f in flows}
    scenario = DemandScenario.parse(args.scenario)
    soc = SocSampler.from_config(config)
    mean_frac = truncated_mean(soc)
    bpr = dict(alpha=config.bpr_alpha, beta=config.bpr_beta,
               vehicle_length_km=config.vehicle_length_km,
               capacity_floor=config.capacity_floor_fraction)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "congestion_report.csv"
    link_path = out_dir / "link_times.csv"
    with open(report_path, "w", encoding="utf-8") as rep_fh, open(link_path, "w", encoding="utf-8") as link_fh:
        rep_fh.write("evp_percent,baseline_total_h,with_queue_total_h,delta_percent\n")
        link_fh.write("evp_percent,link_id,hour,baseline_h,with_queue_h\n")
        for evp_percent in args.evp:
            evp = _evp_fraction(parser, evp_percent)
            queues = {}
            for station in registry:
                series = flow_by_link.get(station.link_id)
                if series is None:
                    raise SchemaError(f"no flow series for link {station.link_id!r}", path=args.flows)
                model = arrival_rates(series, evp, scenario, station_id=station.id)
                es = mean_frac * args.battery / station.charger_power_kw
                queues[station.id] = np.array([
                    solve(QueueParams(rate, es, station.plugs, station.capacity)).mean_queue
                    for rate in model.hourly_rate
                ])
            report = network_delta(links, flows, queues, registry,
                                   ev_p=evp, flow_scale=scenario.scale, **bpr)
            rep_fh.write(f"{evp_percent!r},{report.baseline_total_h!r},"
                         f"{report.with_queue_total_h!r},{report.delta_percent!r}\n")
            for lid in report.link_ids:
                for h in range(HOURS):
                    link_fh.write(f"{evp_percent!r},{lid},{h},"
                                  f"{report.baseline_time_h[lid][h]!r},"
                                  f"{report.with_queue_time_h[lid][h]!r}\n")
            print(f"evp={evp_percent}%: delta={report.delta_percent:.3f}% "
                  f"(baseline {report.baseline_total_h:.1f} veh-h, "
                  f"with queues {report.with_queue_total_h:.1f} veh-h)")

    manifest = _write_manifest(
        out_dir, "couple", argv,
        inputs={"stations": Path(args.stations), "flows": Path(args.flows), "links": Path(args.links)},
        outputs={"congestion_report": report_path, "link_times": link_path},
        started=started,
        extra={"scenario": args.scenario, "battery_kwh": args.battery,
               "evp_percents": list(args.evp)},
    )
    print(f"wrote {report_path}, {link_path}, {manifest}")
    return 0


# ------------------------------------------------------------------ grid ---

def _read_charging_profile(parser, args) -> np.ndarray:
    """Hourly kWh profile from a simple (hour,kwh) file or a sweep results file."""
    import csv as _csv

    path = Path(args.charging)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        cols = reader.fieldnames or []
        rows = list(reader)
    if not rows:
        raise SchemaError("empty charging file", path=path)

    if set(cols) >= {"hour", "kwh"}:
        profile = np.zeros(HOURS)
        for row in rows:
            profile[int(row["hour"]) % HOURS] += float(row["kwh"])
        return profile

    energy_col = "energy_kwh" if "energy_kwh" in cols else (
        "des_energy_kwh" if "des_energy_kwh" in cols else None)
    if energy_col is None or "hour" not in cols:
        raise SchemaError(
            "charging file needs either (hour,kwh) columns or sweep-results "
            "columns (hour + energy_kwh)", path=path,
        )

    def keep(row):
        if args.scenario_filter and row.get("scenario") != args.scenario_filter:
            return False
        if args.evp_filter is not None and float(row["evp_percent"]) != args.evp_filter:
            return False
        if args.battery_filter is not None and float(row["battery_kwh"]) != args.battery_filter:
            return False
        return True

    kept = [row for row in rows if keep(row)]
    if not kept:
        raise SchemaError("no rows left after filters", path=path)
    for col, flag in (("scenario", "--scenario-filter"), ("evp_percent", "--evp-filter"),
                      ("battery_kwh", "--battery-filter")):
        if col in cols and len({row[col] for row in kept}) > 1:
            parser.error(f"charging file mixes several {col} values; disambiguate with {flag}")
    profile = np.zeros(HOURS)
    for row in kept:
        profile[int(row["hour"]) % HOURS] += float(row[energy_col])
    return profile


def _cmd_grid(parser, args, argv) -> int:
    started = time.time()
    charging = _read_charging_profile(parser, args)
    profiles = load_grid_profiles(args.profile)
    if args.label:
        matches = [p for p in profiles if p.label == args.label]
        if not matches:
            raise SchemaError(f"no profile labelled {args.label!r}", path=args.profile)
        profile = matches[0]
    else:
        profile = profiles[0]
    report = grid_coincidence(charging, profile)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    overlay_path = out_dir / "grid_overlay.csv"
    write_grid_overlay(report, overlay_path)
    manifest = _write_manifest(
        out_dir, "grid", argv,
        inputs={"charging": Path(args.charging), "profile": Path(args.profile)},
        outputs={"grid_overlay": overlay_path}, started=started,
        extra={"state_peak_hours": list(report.state_peak_hours),
               "coincidence_ratio": report.ratio, "grid_label": profile.label},
    )
    print(f"grid peak hour(s): {list(report.state_peak_hours)}; "
          f"charging at grid peak = {report.ratio:.3f} of its own daily peak")
    print(f"wrote {overlay_path} and {manifest}")
    return 0


# ----------------------------------------------------------------- synth ---

def _cmd_synth(parser, args, argv) -> int:
    started = time.time()
    if not args.stations_like_paper:
        parser.error("nothing to emit; pass --stations-like-paper")
    paths = write_dataset(args.out_dir, seed=args.seed)
    config_path = Path(args.out_dir) / "default_config.json"
    Config().to_file(config_path)
    paths["config"] = config_path
    manifest = _write_manifest(
        Path(args.out_dir), "synth", argv, inputs={},
        outputs={name: p for name, p in paths.items()},
        started=started, extra={"seed": args.seed},
    )
    print("wrote " + ", ".join(str(p) for p in paths.values()) + f" and {manifest}")
    return 0


# ----------------------------------------------------------------- parser --

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evq",
        description="Fast-charging queue analysis: analytic solve, simulation, "
                    "scenario sweeps, congestion coupling, grid impact.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_data(p, links=False):
        p.add_argument("--stations", help="stations CSV")
        p.add_argument("--flows", help="flows CSV")
        if links:
            p.add_argument("--links", help="links CSV")
        p.add_argument("--config", help="config JSON (or EVQ_CONFIG env var)")

    p = sub.add_parser("solve", help="steady-state solve of one station setting")
    p.add_argument("--lambda", dest="arrival_rate", type=float, help="arrival rate, veh/h")
    p.add_argument("--service-h", dest="service_h", type=float, help="mean service time, hours")
    p.add_argument("--plugs", type=int, help="number of chargers")
    p.add_argument("--capacity", type=int, help="total car slots (charging + waiting)")
    p.add_argument("--power-kw", dest="power_kw", type=float, default=22.0,
                   help="charger power for the energy output (default 22)")
    p.add_argument("--station", help="station id (data-file mode)")
    p.add_argument("--hour", type=int, help="hour of day 0..23 (data-file mode)")
    p.add_argument("--evp", type=float, help="EV penetration, percent (data-file mode)")
    p.add_argument("--battery", type=float, default=82.0, help="battery size kWh (default 82)")
    p.add_argument("--scenario", default="OD2016", help="OD2016 | OD15 | OD30")
    p.add_argument("--out", help="optional CSV output path")
    add_common_data(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("simulate", help="discrete-event simulation of one station")
    p.add_argument("--station", required=True)
    p.add_argument("--evp", type=float, required=True, help="EV penetration, percent")
    p.add_argument("--battery", type=float, default=82.0)
    p.add_argument("--scenario", default="OD2016")
    p.add_argument("--horizon", type=float, default=24.0, help="hours simulated (default 24)")
    p.add_argument("--warmup", type=float, default=0.0, help="hours excluded from stats")
    p.add_argument("--reps", type=int, default=1, help="replications (>=2 adds half-widths)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--inter-arrival", dest="inter_arrival", default="exponential",
                   choices=("exponential", "normal"))
    p.add_argument("--trace", help="optional event-trace CSV path (single rep only)")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    add_common_data(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="full scenario-grid sweep")
    p.add_argument("--mode", default="analytic", choices=("analytic", "des", "both"))
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--seed", type=int, default=None, help="master seed (default from config)")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    add_common_data(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("couple", help="queue spillback vs network travel time")
    p.add_argument("--evp", type=float, action="append", required=True,
                   help="EV penetration percent; repeat for a grid")
    p.add_argument("--battery", type=float, default=82.0)
    p.add_argument("--scenario", default="OD2016")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    add_common_data(p, links=True)
    p.set_defaults(func=_cmd_couple)

    p = sub.add_parser("grid", help="charging-demand vs grid-profile coincidence")
    p.add_argument("--charging", required=True,
                   help="hourly charging CSV: (hour,kwh) or sweep_results.csv")
    p.add_argument("--profile", required=True, help="grid profile CSV (label,h00..h23)")
    p.add_argument("--label", help="profile label to use (default: first row)")
    p.add_argument("--scenario-filter", dest="scenario_filter")
    p.add_argument("--evp-filter", dest="evp_filter", type=float)
    p.add_argument("--battery-filter", dest="battery_filter", type=float)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("synth", help="emit the bundled synthetic dataset")
    p.add_argument("--stations-like-paper", dest="stations_like_paper", action="store_true",
                   help="emit the published 25-station layout with synthetic flows")
    p.add_argument("--seed", type=int, default=7, help="seed for synthetic link geometry")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(parser, args, argv)
    except SystemExit as exc:  # parser.error inside a command
        return int(exc.code) if exc.code is not None else 0
    except (SchemaError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
