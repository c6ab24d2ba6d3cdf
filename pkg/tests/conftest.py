from __future__ import annotations

import pytest

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """``criterion(k, ok, detail)`` records and prints one PASS/FAIL line."""

    def record(k: int, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE[k] = (bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k:2d}: {detail}")
