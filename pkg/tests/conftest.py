"""Shared test plumbing: verdict lines that survive output capture."""

VERDICTS = []


def record_verdict(line):
    """Queue a one-line verdict for the end-of-run summary."""
    VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.line(line)
