import pytest

ACCEPTANCE = []


@pytest.fixture
def record():
    """record(criterion, passed, detail) -> passed; collected for the terminal summary."""
    def _record(criterion, passed, detail):
        ACCEPTANCE.append((criterion, bool(passed), detail))
        return bool(passed)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE, key=lambda r: (int(r[0].rstrip("abc")), r[0])):
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {crit}: {detail}")
