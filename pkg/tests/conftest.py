import os
import sys

import numpy as np
import pytest


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance():
    def record(number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append((str(number), line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        # keys look like "6" or "7b"
        order = lambda item: (int(item[0].rstrip("abcdefgh")), item[0])  # noqa: E731
        for _, line in sorted(ACCEPTANCE_LINES, key=order):
            terminalreporter.write_line(line)


sys.path.insert(0, os.path.dirname(__file__))
