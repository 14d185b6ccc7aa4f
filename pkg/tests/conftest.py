import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

CRITERIA: dict[int, tuple[bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    if report.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else "failed"
    CRITERIA[marker.args[0]] = (report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
