"""Collects one PASS/FAIL line per acceptance criterion.

Acceptance tests carry ``@pytest.mark.criterion(k)`` and may attach a short
``detail`` through the ``record_property`` fixture.  A criterion passes when
every test carrying its number passes.
"""

import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry = _CRITERIA.setdefault(marker.args[0], {"ok": True, "details": []})
        entry["ok"] &= report.passed
        entry["details"].extend(f"{item.name}: {v}" for k, v in report.user_properties if k == "detail")
        if not report.passed and not report.skipped:
            entry["details"].append(f"{item.name}: failed")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        entry = _CRITERIA[k]
        status = "PASS" if entry["ok"] else "FAIL"
        detail = "; ".join(entry["details"])
        terminalreporter.write_line(f"criterion {k:2d}: {status}  {detail}")
