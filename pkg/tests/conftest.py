"""Shared pytest hooks: a per-criterion PASS/FAIL summary for the acceptance suite."""

from __future__ import annotations

import contextlib
import time

import pytest


def pytest_configure(config):
    config._criteria = {}


@pytest.fixture
def criterion(request):
    """``with criterion(n, title) as info:`` records one PASS/FAIL line; ``info`` collects details."""
    lines = request.config._criteria

    @contextlib.contextmanager
    def record(number: int, title: str):
        info: dict = {}
        t0 = time.perf_counter()
        status = "FAIL"
        try:
            yield info
            status = "PASS"
        finally:
            detail = ", ".join(f"{k}={v}" for k, v in info.items())
            line = f"criterion {number}: {status} {title} [{time.perf_counter() - t0:.1f}s] {detail}".rstrip()
            lines[number] = line
            print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    criteria = getattr(config, "_criteria", {})
    if criteria:
        terminalreporter.section("acceptance criteria")
        for number in sorted(criteria):
            terminalreporter.write_line(criteria[number])
