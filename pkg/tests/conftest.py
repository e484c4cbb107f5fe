from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_report(request):
    """Record one summary line per acceptance criterion and assert on it."""
    lines = request.config.stash[_ACCEPTANCE]

    def report(number: int, title: str, passed: bool, detail: str) -> None:
        lines.append((number, f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"))
        assert passed, detail

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
