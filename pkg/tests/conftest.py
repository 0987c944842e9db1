import pytest

_VERDICTS = {}


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict(key, ok, detail)``."""

    def record(key, ok, detail):
        _VERDICTS[key] = (bool(ok), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance")
    for key in sorted(_VERDICTS):
        ok, detail = _VERDICTS[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
