ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance verdicts")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
