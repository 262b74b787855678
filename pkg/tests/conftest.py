import pytest

from evqueue.core import load_flows, load_grid_profiles, load_station_registry
from evqueue.coupling import load_links
from evqueue.synth import bundled_path


@pytest.fixture(scope="session")
def registry():
    return load_station_registry(bundled_path("stations_north_sydney.csv"))


@pytest.fixture(scope="session")
def flows():
    return load_flows(bundled_path("flows_synthetic.csv"))


@pytest.fixture(scope="session")
def flow_by_link(flows):
    return {f.link_id: f for f in flows}


@pytest.fixture(scope="session")
def links():
    return load_links(bundled_path("links_synthetic.csv"))


@pytest.fixture(scope="session")
def grid_profile():
    return load_grid_profiles(bundled_path("grid_profile_synthetic.csv"))[0]
