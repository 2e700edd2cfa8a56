"""Collects the one-line verdicts printed by the acceptance suite so they
also appear in the terminal summary (pytest captures test output)."""

import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    def record(number, passed, detail):
        # passed=None marks a check that could not run here
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {number:>2}: {status}  {detail}"
        print(line)
        _VERDICTS.append(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
