"""Shared fixtures and the acceptance-summary reporter.

test_acceptance.py registers one line per criterion; the hook below prints
them at the end of the run so the verdicts are visible even when everything
passes.
"""

import sys


def _acceptance_lines():
    for name, mod in sys.modules.items():
        if name.rsplit(".", 1)[-1] == "test_acceptance":
            return getattr(mod, "REPORT_LINES", None)
    return None


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = _acceptance_lines()
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
