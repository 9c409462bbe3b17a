"""Shared pytest plumbing.

The acceptance suite appends one verdict line per numbered criterion to
acceptance_report; plain prints are swallowed by output capture, so a
terminal-summary hook emits them after the run instead.
"""

acceptance_report: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_report:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(acceptance_report):
        terminalreporter.write_line(line)
