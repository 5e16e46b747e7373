from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tabsynth.fixture import FIXTURE_SCHEMA, load_fixture  # noqa: E402
from tabsynth.profile import ProfileOptions, extract_profile  # noqa: E402


@pytest.fixture(scope="session")
def fixture_table():
    return load_fixture()


@pytest.fixture(scope="session")
def fixture_schema():
    return FIXTURE_SCHEMA


@pytest.fixture(scope="session")
def fixture_profile(fixture_table):
    return extract_profile(fixture_table, ProfileOptions(bmi_column="BMI"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
