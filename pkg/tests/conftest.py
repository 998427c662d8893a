import numpy as np
import pytest

# criterion number -> (title, passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def record(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, bool(passed), detail)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, max(12, max(ACCEPTANCE)) + 1):
        title, ok, detail = ACCEPTANCE.get(k, ("not run", False, ""))
        line = f"[{'PASS' if ok else 'FAIL'}] {k:2d}. {title}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
