"""Shared fixtures and the acceptance summary printed at the end of a run."""
import pytest

# criterion number -> (title, passed, detail)
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def record_acceptance():
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
