import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from qon.formulation import schedule as _schedule  # noqa: E402

_extracted = []
# suite-wide audit tally, reported at the end of the run
AUDIT = {"schedules": 0, "max_residual": 0.0}
# "criterion N: PASS|FAIL ..." lines from the acceptance tests
ACCEPTANCE: list[str] = []


@pytest.fixture(autouse=True)
def audit_every_schedule(monkeypatch):
    """Re-validate every schedule extracted during a test against its scenario."""
    original = _schedule.extract_schedule

    def wrapped(model, sol, s):
        sch = original(model, sol, s)
        _extracted.append((sch, s))
        return sch

    monkeypatch.setattr(_schedule, "extract_schedule", wrapped)
    start = len(_extracted)
    yield
    for sch, s in _extracted[start:]:
        rep = _schedule.validate_schedule(sch, s)
        AUDIT["schedules"] += 1
        AUDIT["max_residual"] = max(AUDIT["max_residual"], rep.max_residual)
        assert rep.max_residual <= 1e-6, f"schedule audit failed: {rep.violations[:3]}"
    del _extracted[start:]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
    if AUDIT["schedules"]:
        terminalreporter.write_line(
            f"schedule audit: {AUDIT['schedules']} schedules re-validated, "
            f"max residual {AUDIT['max_residual']:.2e}"
        )
