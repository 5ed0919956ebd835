import pytest

# criterion number -> list of (check name, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, check, passed, detail=""):
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(passed), detail))
    print(f"criterion {criterion} [{check}]: {'PASS' if passed else 'FAIL'} {detail}")


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[criterion]
        ok = all(passed for _, passed, _ in checks)
        failed = [f"{name}: {detail}" for name, passed, detail in checks if not passed]
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += " (" + "; ".join(failed) + ")"
        terminalreporter.write_line(line)
