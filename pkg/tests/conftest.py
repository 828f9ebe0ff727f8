import pytest


@pytest.fixture(scope="session")
def acceptance_log(request):
    log = getattr(request.config, "_acceptance_log", None)
    if log is None:
        log = request.config._acceptance_log = {}
    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = getattr(config, "_acceptance_log", None)
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(log):
        terminalreporter.write_line(log[n])
