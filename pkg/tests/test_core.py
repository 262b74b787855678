import math

import pytest

from evqueue.core import (
    Config,
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

HEADER = "id,plugs,charger_power_kw,waiting_slots,link_id\n"


def test_bundled_registry_matches_published_layout(registry):
    assert len(registry) == 25
    hist = registry.plug_histogram()
    # the enumerated counts: 7x1, 10x2, 2x3, 3x4, one 7 and one 10,
    # plus the 9-plug site that completes the 25-station fleet
    assert hist[1] == 7 and hist[2] == 10 and hist[3] == 2 and hist[4] == 3
    assert hist[7] == 1 and hist[9] == 1 and hist[10] == 1
    assert all(s.charger_power_kw == 22.0 for s in registry)


def test_empty_file_header_only(tmp_path):
    p = tmp_path / "stations.csv"
    p.write_text(HEADER)
    assert len(load_station_registry(p)) == 0


def test_zero_plugs_rejected(tmp_path):
    p = tmp_path / "stations.csv"
    p.write_text(HEADER + "A,0,22.0,10,L1\n")
    with pytest.raises(SchemaError, match="plugs"):
        load_station_registry(p)


def test_duplicate_ids_rejected(tmp_path):
    p = tmp_path / "stations.csv"
    p.write_text(HEADER + "A,1,22.0,10,L1\nA,2,22.0,10,L2\n")
    with pytest.raises(SchemaError, match="duplicate"):
        load_station_registry(p)


def test_bad_header_rejected(tmp_path):
    p = tmp_path / "stations.csv"
    p.write_text("id,plugs\nA,1\n")
    with pytest.raises(SchemaError, match="header"):
        load_station_registry(p)


def test_parse_error_carries_line_number(tmp_path):
    p = tmp_path / "stations.csv"
    p.write_text(HEADER + "A,1,22.0,10,L1\nB,two,22.0,10,L2\n")
    with pytest.raises(SchemaError, match=r":3:"):
        load_station_registry(p)


def test_waiting_slots_default_applies_to_empty_cell(tmp_path):
    p = tmp_path / "stations.csv"
    p.write_text(HEADER + "A,1,22.0,,L1\n")
    reg = load_station_registry(p, waiting_slots_default=4)
    assert reg.get("A").waiting_slots == 4
    assert reg.get("A").capacity == 5


def test_registry_roundtrip(tmp_path, registry):
    out = tmp_path / "out.csv"
    write_station_registry(registry, out)
    again = load_station_registry(out)
    assert again == registry


def test_station_invariants():
    st = Station("A", 2, 22.0, 3, "L1")
    assert st.capacity == 5
    with pytest.raises(ValueError):
        Station("A", 1, -22.0, 3, "L1")
    with pytest.raises(ValueError):
        Station("A", 1, 22.0, -1, "L1")
    with pytest.raises(ValueError):
        Station("", 1, 22.0, 0, "L1")


def test_flows_trivial_row(tmp_path):
    cols = ",".join(f"h{h:02d}" for h in range(24))
    p = tmp_path / "flows.csv"
    p.write_text(f"link_id,{cols}\nL1," + ",".join(["100"] * 24) + "\n")
    series = load_flows(p)
    assert len(series) == 1
    assert series[0].flows == (100.0,) * 24


def test_flows_23_columns_rejected(tmp_path):
    cols = ",".join(f"h{h:02d}" for h in range(23))
    p = tmp_path / "flows.csv"
    p.write_text(f"link_id,{cols}\nL1," + ",".join(["100"] * 23) + "\n")
    with pytest.raises(SchemaError):
        load_flows(p)


def test_flows_negative_rejected(tmp_path):
    cols = ",".join(f"h{h:02d}" for h in range(24))
    p = tmp_path / "flows.csv"
    p.write_text(f"link_id,{cols}\nL1," + ",".join(["100"] * 23 + ["-1"]) + "\n")
    with pytest.raises(SchemaError, match="hour 23"):
        load_flows(p)


def test_bundled_flows_are_bimodal(flows):
    assert len(flows) == 25
    for series in flows:
        vals = series.flows
        peaks = [h for h in range(1, 23) if vals[h] > vals[h - 1] and vals[h] > vals[h + 1]]
        assert len(peaks) == 2, f"{series.link_id} not bimodal: {peaks}"
        am, pm = peaks
        assert am <= 11 and pm >= 12


def test_flows_roundtrip(tmp_path, flows):
    out = tmp_path / "flows.csv"
    write_flows(flows, out)
    assert load_flows(out) == flows


def test_flows_avg_d_variant_roundtrip(tmp_path):
    series = HourlyFlowSeries("L1", tuple(float(h) for h in range(24)),
                              tuple(5.0 + 0.1 * h for h in range(24)))
    out = tmp_path / "flows.csv"
    write_flows([series], out)
    again = load_flows(out)
    assert again == [series]
    assert again[0].avg_d_km is not None


def test_grid_profile_validation():
    with pytest.raises(ValueError, match="zero"):
        GridProfile("dead", (0.0,) * 24)
    with pytest.raises(ValueError, match="24"):
        GridProfile("short", (1.0,) * 23)


def test_bundled_grid_profile(grid_profile):
    assert max(grid_profile.hourly_mw) == grid_profile.hourly_mw[18]
    assert all(v > 0 for v in grid_profile.hourly_mw)


def test_grid_profile_loader_rejects_garbage(tmp_path):
    p = tmp_path / "grid.csv"
    p.write_text("label," + ",".join(f"h{h:02d}" for h in range(24)) + "\n"
                 + "x," + ",".join(["1"] * 23 + ["oops"]) + "\n")
    with pytest.raises(SchemaError, match="h23"):
        load_grid_profiles(p)


def test_demand_scenario_scales():
    assert DemandScenario.OD2016.scale == 1.0
    assert DemandScenario.OD15.scale == 1.15
    assert DemandScenario.OD30.scale == 1.30
    with pytest.raises(ValueError, match="OD9000"):
        DemandScenario.parse("OD9000")


def test_scenario_spec_validation():
    spec = ScenarioSpec(DemandScenario.OD2016, 0.001, 82.0, 8, 42)
    assert spec.ev_p == 0.001
    with pytest.raises(ValueError):
        ScenarioSpec(DemandScenario.OD2016, 0.0, 82.0, 8, 42)
    with pytest.raises(ValueError):
        ScenarioSpec(DemandScenario.OD2016, 0.5, 82.0, 24, 42)


def test_config_defaults_and_grid_sizes():
    cfg = Config()
    assert cfg.waiting_slots_default == 10
    assert len(cfg.battery_grid_kwh) == 8
    assert cfg.battery_grid_kwh[0] == 50.0 and cfg.battery_grid_kwh[-1] == 106.0
    # 5 low + 21 mid + 4 high penetration values
    assert len(cfg.evp_grid_percent) == 30
    assert math.isclose(min(cfg.evp_grid_percent), 0.01)
    assert max(cfg.evp_grid_percent) == 5.0


def test_config_file_roundtrip(tmp_path):
    cfg = Config(waiting_slots_default=6, soc_sd=0.05, seed=777)
    p = tmp_path / "config.json"
    cfg.to_file(p)
    assert Config.from_file(p) == cfg


def test_config_unknown_key_rejected(tmp_path):
    p = tmp_path / "config.json"
    p.write_text('{"waiting_slots_default": 5, "sock_mean": 0.4}')
    with pytest.raises(SchemaError, match="sock_mean"):
        Config.from_file(p)


def test_config_validation():
    with pytest.raises(ValueError):
        Config(soc_mean=0.9, soc_bounds=(0.2, 0.8))
    with pytest.raises(ValueError):
        Config(battery_grid_kwh=())
    with pytest.raises(ValueError):
        Config(arrival_cv=0.9)
