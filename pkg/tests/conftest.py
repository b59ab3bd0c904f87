import pytest

_LINES = []


@pytest.fixture
def acceptance():
    """Record one summary line per acceptance criterion."""
    def record(number: int, title: str, checks: dict):
        failed = [k for k, ok in checks.items() if not ok]
        status = "PASS" if not failed else "FAIL"
        detail = "" if not failed else " (failed: " + ", ".join(failed) + ")"
        _LINES.append((number, f"criterion {number} {status}: {title}{detail}"))
        print(_LINES[-1][1])
        assert not failed, failed

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES):
            terminalreporter.write_line(line)
