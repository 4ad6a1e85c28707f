import pytest

_VERDICTS: dict = {}


@pytest.fixture
def verdict(capsys):
    """Record and print the outcome of one acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str, lines=()):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS[number] = line
        with capsys.disabled():
            print()
            for extra in lines:
                print(f"    {extra}")
            print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[number])
