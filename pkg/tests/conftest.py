import pytest

_LINES = {}


@pytest.fixture
def verdict():
    """Record one acceptance line per criterion and assert it."""

    def record(key, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {key:<3} {title}: {detail}"
        _LINES[key] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    order = lambda k: (int("".join(c for c in k if c.isdigit())), k)
    for key in sorted(_LINES, key=order):
        terminalreporter.write_line(_LINES[key])
