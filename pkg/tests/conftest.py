import pytest

CRITERIA = {
    1: "GPR matches dense oracle",
    2: "noiseless GPR interpolates",
    3: "SLERP suite",
    4: "DDIM closed loop",
    5: "fusion transcription",
    6: "frame selection",
    7: "end-to-end determinism and endpoints",
    8: "GPR blending smooths the transition",
    9: "format and CLI contracts",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    n = dict(report.user_properties).get("criterion")
    if n is None:
        return
    if report.when == "call" or report.failed:
        ok = report.passed or (report.when != "call" and not report.failed)
        _outcomes.setdefault(n, []).append(ok and not report.skipped)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        status = "PASS" if results and all(results) else ("FAIL" if results else "NOT RUN")
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")
