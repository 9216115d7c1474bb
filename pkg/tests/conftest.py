import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """``criterion(k, passed, message)`` records the outcome line of acceptance criterion ``k``.

    Returns ``passed`` for this part alone.
    """

    def record(k, passed, message):
        key = str(k)
        line = (passed, message)
        prev = _ACCEPTANCE.get(key)
        # a criterion split over several tests fails if any part fails
        if prev is not None:
            line = (passed and prev[0], f"{prev[1]}; {message}")
        _ACCEPTANCE[key] = line
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda s: int(s)):
        passed, message = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {message}")
