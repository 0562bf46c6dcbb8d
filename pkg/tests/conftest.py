import pytest

_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def verdicts(request):
    """Shared map ``criterion -> (ok, detail)`` filled by the acceptance tests."""
    return request.config.stash.setdefault(_VERDICTS, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_VERDICTS, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(table, key=lambda k: int(k)):
        ok, detail = table[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
