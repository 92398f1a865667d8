import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail, notes=())`` records one PASS/FAIL line and asserts ``ok``."""

    def report(n, ok, detail, notes=()):
        line = f"CRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[n] = [line, *(f"    {s}" for s in notes)]
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            for line in _ACCEPTANCE[n]:
                terminalreporter.write_line(line)
