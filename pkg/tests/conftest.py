import sys
from pathlib import Path

import pytest

from simbus.dbc import load_dbc

TESTS_DIR = Path(__file__).resolve().parent
DATA_DIR = TESTS_DIR / "data"

sys.path.insert(0, str(TESTS_DIR))  # makes the oracle module importable


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        number, name = marker.args
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {number} ({name}): {verdict}", file=sys.stderr)


@pytest.fixture(scope="session")
def sample_dbc_path() -> Path:
    return DATA_DIR / "sample.dbc"


@pytest.fixture(scope="session")
def sample_db(sample_dbc_path):
    return load_dbc(sample_dbc_path)


@pytest.fixture(scope="session")
def dbc_map_path() -> Path:
    return DATA_DIR / "dbc_map.json"


@pytest.fixture(scope="session")
def scenarios_dir() -> Path:
    return DATA_DIR / "scenarios"


@pytest.fixture(scope="session")
def run_config_path() -> Path:
    return DATA_DIR / "run_config.yml"
