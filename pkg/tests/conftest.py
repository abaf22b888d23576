import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# Warsaw Stock Exchange closing days, 2014-12 .. 2016-02
WSE_HOLIDAYS = (
    "2014-12-24", "2014-12-25", "2014-12-26", "2014-12-31",
    "2015-01-01", "2015-01-06", "2015-04-03", "2015-04-06", "2015-05-01",
    "2015-06-04", "2015-11-11", "2015-12-24", "2015-12-25", "2015-12-31",
    "2016-01-01", "2016-01-06",
)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_acceptance: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _acceptance.append((name, report.outcome.upper(), f"{report.duration:.2f}s"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, took in _acceptance:
        terminalreporter.write_line(f"{name:<60} {outcome:<8} {took}")
