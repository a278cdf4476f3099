import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from onionwsn.topology import grid_topology, random_geometric_topology  # noqa: E402


@pytest.fixture(scope="session")
def grid2():
    return grid_topology(2, 2)


@pytest.fixture(scope="session")
def grid3():
    return grid_topology(3, 3)


@pytest.fixture(scope="session")
def rgg100():
    return random_geometric_topology(100, seed=1)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
