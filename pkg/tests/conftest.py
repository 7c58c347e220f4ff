import pytest

_REPORT = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict; all lines are printed after the run."""

    def add(number, passed, detail):
        _REPORT.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        print(_REPORT[-1])

    return add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_REPORT, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
