import re

import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record ``criterion(n, ok, detail)`` for the acceptance summary."""

    def record(n, ok, detail=""):
        _CRITERIA[n] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA, key=lambda k: (int(re.match(r"\d+", str(k)).group()), str(k))):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {str(n):>3}: {'PASS' if ok else 'FAIL'}  {detail}")
