import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE = {}


def record(n: int, title: str, ok: bool, detail: str = ""):
    """Register one acceptance verdict and echo it."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {title}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE[n] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
