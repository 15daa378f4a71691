import pytest

_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def criterion_log():
    """Collects one pass/fail line per acceptance criterion for the summary."""
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
