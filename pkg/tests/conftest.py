"""Collects acceptance-criterion outcomes and prints one PASS/FAIL line per criterion."""

from __future__ import annotations

import pytest

_ORDER: list[str] = []
_RAN: set[str] = set()
_FAILED: set[str] = set()


def _criterion(item) -> str | None:
    mark = item.get_closest_marker("acceptance")
    return mark.args[0] if mark is not None else None


def pytest_collection_modifyitems(items):
    for item in items:
        name = _criterion(item)
        if name is not None and name not in _ORDER:
            _ORDER.append(name)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    name = _criterion(item)
    if name is None:
        return
    if report.when == "call":
        _RAN.add(name)
    if report.failed:
        _RAN.add(name)
        _FAILED.add(name)


def pytest_terminal_summary(terminalreporter):
    if not _ORDER:
        return
    terminalreporter.section("acceptance criteria")
    for name in _ORDER:
        if name in _FAILED:
            status = "FAIL"
        elif name in _RAN:
            status = "PASS"
        else:
            status = "SKIP"
        terminalreporter.write_line(f"{status}  {name}")
