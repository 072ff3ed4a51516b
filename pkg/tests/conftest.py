import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# filled by test_acceptance.py: number -> (title, passed, detail)
CRITERIA: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA, key=str):
        title, ok, detail = CRITERIA[num]
        terminalreporter.write_line(f"[{num}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
