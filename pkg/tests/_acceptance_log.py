"""Shared sink for acceptance pass/fail lines (echoed in the run summary)."""

RESULTS = []


def record(line: str):
    RESULTS.append(line)
