import pytest

# criterion number -> (passed, detail), filled in by test_acceptance.py
VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(VERDICTS):
        ok, detail = VERDICTS[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
