"""Collects acceptance verdict lines and prints them after the test run,
outside pytest's output capture."""

_VERDICTS = []


def register_verdict(line):
    _VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
