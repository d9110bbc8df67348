import pytest

from acceptance_log import LINES


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: numbered acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
