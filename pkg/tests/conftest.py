import numpy as np
import pytest

from gpmisspec.designs import gen_grid, gen_halton


@pytest.fixture
def grid64():
    return gen_grid(1, 64)


@pytest.fixture
def halton2d():
    return gen_halton(2, 49)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
