"""Shared test plumbing.

The acceptance module reports each end-to-end gate through the `gate`
fixture so every criterion shows up as one PASS/FAIL line with the measured
numbers, echoed again after the run summary (pytest captures stdout of
passing tests, the summary hook is not captured).
"""

import pytest

GATE_LINES: list[str] = []


@pytest.fixture
def gate():
    def _gate(ok: bool, name: str, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        print(line, flush=True)
        GATE_LINES.append(line)
        assert ok, line

    return _gate


def pytest_terminal_summary(terminalreporter):
    if GATE_LINES:
        terminalreporter.section("acceptance gates")
        for line in GATE_LINES:
            terminalreporter.write_line(line)
