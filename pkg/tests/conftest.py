import pytest

_ACCEPTANCE = {}
_EXPECTED = range(1, 10)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, ok, detail, skipped=False):
        status = "SKIP" if skipped else ("PASS" if ok else "FAIL")
        line = f"criterion {number}: {status} - {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in _EXPECTED:
        terminalreporter.write_line(_ACCEPTANCE.get(n, f"criterion {n}: FAIL - no result recorded"))
