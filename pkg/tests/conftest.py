import pytest
from hypothesis import settings

settings.register_profile("lsnn", deadline=None, max_examples=40)
settings.load_profile("lsnn")

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Append ``(criterion, passed, detail)``; printed in the terminal summary."""
    def record(criterion: str, passed: bool, detail: str):
        line = f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
