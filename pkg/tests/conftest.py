import pytest

# criterion label -> (passed, detail); filled by test_acceptance.py
CRITERIA: dict = {}


def record(label: str, passed: bool, detail: str) -> bool:
    CRITERIA[label] = (bool(passed), detail)
    return bool(passed)


@pytest.fixture
def criteria():
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, (passed, detail) in CRITERIA.items():
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
