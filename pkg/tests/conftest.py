"""Shared fixtures plus a terminal summary of the acceptance gate.

The hook at the bottom prints one PASS/FAIL line per acceptance criterion
after the run, so the gate's verdict is readable without scrolling through
the full test listing.
"""

import re

import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    pattern = re.compile(r"test_acceptance\.py::test_(criterion_\d+\w*)")
    verdicts = {}
    for outcome in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(outcome, ()):
            nodeid = getattr(report, "nodeid", "")
            m = pattern.search(nodeid)
            if m:
                label = "PASS" if outcome == "passed" else outcome.upper()
                verdicts[m.group(1)] = label
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(verdicts):
        terminalreporter.write_line(f"{name}: {verdicts[name]}")


@pytest.fixture(scope="session")
def tiny_rng_seed():
    return 20260819
