from __future__ import annotations

import pytest

RESULTS = pytest.StashKey[list]()


def pytest_configure(config) -> None:
    config.stash[RESULTS] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the test still asserts on its own outcome."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        print(line)
        request.config.stash[RESULTS].append((number, line))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    lines = sorted(config.stash.get(RESULTS, []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)
