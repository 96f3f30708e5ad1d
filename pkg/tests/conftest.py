import os

from hypothesis import settings

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

# one line per acceptance criterion, printed after the run
CRITERIA_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=_order):
            terminalreporter.write_line(line)


def _order(line):
    tag = line.split()[1]            # e.g. "C9b"
    num = "".join(ch for ch in tag[1:] if ch.isdigit())
    return int(num), tag
