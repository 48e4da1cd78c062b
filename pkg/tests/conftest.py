import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one summary line per acceptance criterion; printed in the terminal summary."""

    def record(number: int, passed: bool, detail: str):
        ACCEPTANCE_LINES[number] = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
