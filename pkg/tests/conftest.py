"""Collects the acceptance verdicts and prints them as one block at the end of the run."""

VERDICTS = {}


def record(number, ok, detail):
    VERDICTS[number] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        ok, detail = VERDICTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}")
