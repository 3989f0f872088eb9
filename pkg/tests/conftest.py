import pytest

_CRITERIA: list[tuple[int, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line, print it, then assert on it."""

    def report(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title} -- {detail}"
        _CRITERIA.append((number, line))
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
