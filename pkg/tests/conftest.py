"""Shared test plumbing: collect acceptance verdicts and reprint them
after the run, outside stdout capture."""

import pytest

_verdict_lines = []


@pytest.fixture(scope="session")
def criterion_log():
    return _verdict_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _verdict_lines:
        terminalreporter.section("acceptance criteria")
        for line in _verdict_lines:
            terminalreporter.write_line(line)
