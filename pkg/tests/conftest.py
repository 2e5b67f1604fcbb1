import time

import pytest

SUITE_BUDGET = 180.0


def pytest_sessionstart(session):
    session.config._recede_t0 = time.perf_counter()
    session.config._recede_gate = []


@pytest.fixture
def gate_log(request):
    return request.config._recede_gate


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_recede_gate", [])
    if not lines:
        return
    elapsed = time.perf_counter() - config._recede_t0
    tr = terminalreporter
    tr.section("acceptance criteria")
    for line in lines:
        tr.write_line(line)
    verdict = "PASS" if elapsed < SUITE_BUDGET else "FAIL"
    tr.write_line(f"session runtime {verdict}  {elapsed:.1f}s (budget {SUITE_BUDGET:.0f}s)")
