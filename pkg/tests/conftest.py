import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oosplan.scenario import default_scenario_path, load_scenario  # noqa: E402


@pytest.fixture(scope="session")
def multimodal():
    return load_scenario(default_scenario_path("multimodal"))


@pytest.fixture(scope="session")
def high_thrust_scn():
    return load_scenario(default_scenario_path("high_thrust"))


@pytest.fixture()
def catalog_file(tmp_path):
    p = tmp_path / "catalog.csv"
    p.write_text("name,longitude_deg\nsatA,-160\nsatB,-150\nsatC,-140\n")
    return p
