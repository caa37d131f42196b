ACCEPTANCE_RESULTS = []


def record_acceptance(number, name, passed, details=""):
    ACCEPTANCE_RESULTS.append((number, name, bool(passed), details))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, name, passed, details in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        line = f"ACCEPTANCE {number:2d} [{status}] {name}"
        if details:
            line += f" -- {details}"
        terminalreporter.write_line(line)
