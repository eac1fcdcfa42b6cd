import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; call with (number, title, passed, detail)."""

    def record(number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        _ACCEPTANCE[number] = f"[{status}] criterion {number:2d}: {title} -- {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
