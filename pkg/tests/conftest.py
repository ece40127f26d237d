"""Shared pytest hooks: per-criterion PASS/FAIL summary for the acceptance suite."""

from collections import OrderedDict

import pytest

_RESULTS = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    n = mark.args[0]
    entry = _RESULTS.setdefault(n, {"ok": True, "notes": []})
    entry["ok"] &= rep.passed
    for key, value in item.user_properties:
        if key == "detail":
            entry["notes"].append(str(value))
    if not rep.passed:
        entry["notes"].append(f"{item.name} {rep.outcome}")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        notes = "; ".join(e["notes"])
        terminalreporter.write_line(f"criterion {n}: {'PASS' if e['ok'] else 'FAIL'}"
                                    + (f" ({notes})" if notes else ""))
