"""Shared pytest plumbing: acceptance-criterion summary lines.

Tests marked ``@pytest.mark.criterion("<name>")`` get one PASS/FAIL/SKIP
line each in the terminal summary, with an optional measured-value note
attached through the ``criterion_note`` fixture.
"""

from __future__ import annotations

import pytest

_RESULTS: dict[str, tuple[str, str]] = {}

_STATUS = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(name): top-level acceptance criterion this test verifies",
    )


def _skip_reason(report) -> str:
    if isinstance(report.longrepr, tuple):
        return report.longrepr[2].removeprefix("Skipped: ")
    return str(report.longrepr or "")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "setup" and report.skipped:
        _RESULTS[name] = ("SKIP", _skip_reason(report))
    elif report.when == "call":
        note = getattr(item, "_criterion_note", "")
        if report.skipped:
            note = _skip_reason(report)
        _RESULTS[name] = (_STATUS[report.outcome], note)


@pytest.fixture
def criterion_note(request):
    """Attach a measured-value note to this test's acceptance line."""

    def note(text: str) -> None:
        request.node._criterion_note = text

    return note


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (status, note) in _RESULTS.items():
        line = f"{status} {name}"
        if note:
            line += f" :: {note}"
        terminalreporter.write_line(line)
