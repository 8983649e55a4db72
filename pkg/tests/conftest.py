import acceptance_report


def pytest_terminal_summary(terminalreporter):
    if not acceptance_report.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_report.RESULTS):
        terminalreporter.write_line(acceptance_report.RESULTS[number])
