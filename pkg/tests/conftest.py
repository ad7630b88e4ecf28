import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, printed at the end of the run."""

    def record(criterion: int, name: str, passed: bool, detail: str = ""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {name}"
        if detail:
            line += f" ({detail})"
        _ACCEPTANCE.append((criterion, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
