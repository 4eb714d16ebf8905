"""Collects the outcome of each acceptance criterion and prints one line per
criterion at the end of the run."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_c(\d+)_(\w+)")
_results: dict[int, dict] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    entry = _results.setdefault(int(m.group(1)), {"ok": True, "ran": False, "notes": []})
    if report.when == "call":
        entry["ran"] = True
        entry["notes"] += [f"{k}={v}" for k, v in report.user_properties]
    if report.failed or report.skipped:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        e = _results[num]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        notes = "  " + ", ".join(e["notes"]) if e["notes"] else ""
        terminalreporter.write_line(f"criterion {num:2d}: {status}{notes}")
