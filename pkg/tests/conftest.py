"""Shared pytest wiring: acceptance-gate reporting.

Each acceptance test records its verdict through the ``gate`` fixture;
the terminal summary then prints one PASS/FAIL line per criterion so a
plain ``pytest -v`` run shows the whole gate at a glance.
"""

import pytest

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def gate():
    def record(num: int, desc: str, ok: bool, detail: str = ""):
        ACCEPTANCE[num] = (desc, bool(ok), str(detail))
        assert ok, f"acceptance criterion {num} ({desc}): {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        desc, ok, detail = ACCEPTANCE[num]
        status = "PASS" if ok else "FAIL"
        line = f"criterion {num:2d}  {status}  {desc}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
