"""Shared pytest wiring: print the acceptance verdict block after the run."""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None) if module else None
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in verdicts:
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}")
