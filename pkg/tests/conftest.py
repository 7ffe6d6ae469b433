import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Collect one human-readable pass/fail line per acceptance criterion."""

    def _add(line: str) -> None:
        _LINES.append(line)
        print(line)

    return _add


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
