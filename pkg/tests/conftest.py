import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

CRITERIA = {
    1: "GVT safety",
    2: "GVT monotonicity",
    3: "oracle equivalence",
    4: "missed-message scenario",
    5: "wait-free progress contrast",
    6: "protocol agreement",
    7: "performance trend",
    8: "PHOLD stability",
    9: "rollback determinism",
}

_outcomes = {}


def pytest_runtest_logreport(report):
    num = getattr(report, "criterion", None)
    if num is None:
        return
    if report.when == "call" or report.failed or (report.when == "setup" and report.skipped):
        prev = _outcomes.get(num, "PASS")
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        _outcomes[num] = "FAIL" if "FAIL" in (prev, status) else status


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        status = _outcomes.get(num, "NOT RUN")
        terminalreporter.write_line(f"criterion {num} ({CRITERIA[num]}): {status}")
