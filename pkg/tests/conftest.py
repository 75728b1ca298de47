import pytest

VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Print and record one pass/fail line, then fail the test if the criterion is not met."""

    def report(number: int, name: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        print(line)
        VERDICTS.append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
