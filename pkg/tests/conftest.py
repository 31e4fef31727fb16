from criteria import RESULTS, TITLES


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(TITLES):
        if number not in RESULTS:
            continue
        passed, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {TITLES[number]}: {detail}")
