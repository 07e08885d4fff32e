from __future__ import annotations

import pytest

from kslab.grid import Grid2D


@pytest.fixture(scope="session")
def grid256() -> Grid2D:
    return Grid2D(16.0, 256)


@pytest.fixture(scope="session")
def grid128() -> Grid2D:
    return Grid2D(16.0, 128)


@pytest.fixture(scope="session")
def grid64() -> Grid2D:
    return Grid2D(8.0, 64)


# acceptance verdict lines, echoed in the terminal summary even when output is captured
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
