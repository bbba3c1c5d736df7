import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """``report(n, ok, detail)`` records one PASS/FAIL line for criterion ``n``."""
    lines = request.config.stash.setdefault(_LINES, [])

    def report(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        lines.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
