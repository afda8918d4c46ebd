"""Shared pytest setup: flat-layout imports, the `slow` marker, and a private audit DB."""
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

DATA_DIR = Path(__file__).resolve().parent / "data"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo acceptance runs (need --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def isolated_audit_db(tmp_path, monkeypatch):
    import audit
    monkeypatch.setattr(audit, "AUDIT_DB", tmp_path / "audit.db")
    return tmp_path / "audit.db"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR
