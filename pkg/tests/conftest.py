from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from iotbench.streamgen import ensure_fixture  # noqa: E402


@pytest.fixture(scope="session")
def fixture_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("fixtures")


@pytest.fixture(scope="session")
def city_1h(fixture_cache):
    return ensure_fixture("CITY", fixture_cache, hours=1.0)


@pytest.fixture(scope="session")
def taxi_1h(fixture_cache):
    return ensure_fixture("TAXI", fixture_cache, hours=1.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(results, key=lambda c: int(c[1:])):
        status, detail = results[cid]
        terminalreporter.write_line(f"{cid:<4} {status}  {detail}")
