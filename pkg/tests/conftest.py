"""Shared pytest plumbing.

Collects the acceptance checklist lines (see test_acceptance.criterion)
and echoes them in the terminal summary, so they survive output capture
in a plain `pytest -v` run.
"""

CHECKLIST = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CHECKLIST:
        return
    terminalreporter.section("acceptance checklist")
    for line in CHECKLIST:
        terminalreporter.write_line(line)
