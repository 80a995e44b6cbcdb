"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import pytest

_LINES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    status = "PASS" if rep.passed else "FAIL"
    if rep.passed and dict(item.user_properties).get("soft_warning"):
        status = "PASS (soft warning)"
    _LINES[number] = f"[{status}] criterion {number}: {title}" + (f" -- {detail}" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_LINES):
        terminalreporter.write_line(_LINES[number])
