"""Shared fixtures and the acceptance summary printout."""

from __future__ import annotations

import pytest

from crooklab.oracle_core import LazyFunctionTable

ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES[number] = f"[{status}] criterion {number:>2}: {title} ({detail})"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def table8():
    return LazyFunctionTable(8, 2024, "h", max_index=8)
