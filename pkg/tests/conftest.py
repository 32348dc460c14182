import helpers


def pytest_terminal_summary(terminalreporter):
    if helpers.REPORT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in helpers.REPORT_LINES:
            terminalreporter.write_line(line)
