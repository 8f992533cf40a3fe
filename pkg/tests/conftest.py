import sys
from pathlib import Path

# Make test-local helpers (dicom_fixtures) importable regardless of rootdir.
sys.path.insert(0, str(Path(__file__).parent))

# Filled by tests/test_acceptance.py; echoed after the run so the
# per-criterion results are visible without -s.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
