import os
from pathlib import Path

import pytest

from sessionclust.session_ingest import read_log, table1_path

TABLE1_ROWS = [
    "1 1",
    "2",
    "3 2 2 4 2 2 2 3 3",
    "5",
    "1",
    "6",
    "1 1",
    "6",
    "6 7 7 7 6 6 8 8 8 8",
    "6 9 4 4 4 10 3 10 5 10 4 4 4",
    "1 1 1 1 1 1 1 1",
    "12 12",
    "1 1",
]


def full_msnbc_path():
    """Location of the full UCI msnbc990928.seq, if one is available."""
    candidates = [os.environ.get("MSNBC_SEQ"),
                  Path(__file__).parent / "data" / "msnbc990928.seq"]
    for c in candidates:
        if c and Path(c).is_file():
            return Path(c)
    return None


@pytest.fixture(scope="session")
def table1_file():
    return Path(str(table1_path()))


@pytest.fixture(scope="session")
def table1(table1_file):
    return read_log(table1_file)


_criteria: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion this test checks")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    label = getattr(report, "criterion", None)
    if label is None:
        return
    _criteria.setdefault(label, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep.criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_criteria, key=lambda s: int(s.split(".")[0])):
        outcomes = _criteria[label]
        if any(o == "failed" for o in outcomes):
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        skipped = outcomes.count("skipped")
        note = f", {skipped} skipped" if skipped and status != "SKIP" else ""
        terminalreporter.write_line(f"[{status}] criterion {label} ({len(outcomes)} checks{note})")
