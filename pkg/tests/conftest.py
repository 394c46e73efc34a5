"""Shared pytest wiring: the acceptance verdict ledger.

Acceptance tests append one line per criterion; the terminal summary
hook replays them after the run, outside capture, so the verdicts are
visible in any log regardless of -s.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
