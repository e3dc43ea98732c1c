import pytest

_LOG = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LOG] = []


@pytest.fixture
def criterion(request):
    """Call ``criterion(number, title, ok, detail)`` to record one acceptance line."""
    log = request.config.stash[_LOG]

    def report(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}"
        if detail:
            line += f" ({detail})"
        print(line)
        log.append((number, line))
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_LOG, [])
    if log:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(log):
            terminalreporter.write_line(line)
