import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (title, passed, seconds, note); filled in by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, secs, note = ACCEPTANCE[num]
        line = f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title} ({secs:.2f}s)"
        tr.write_line(line + (f" -- {note}" if note else ""))
