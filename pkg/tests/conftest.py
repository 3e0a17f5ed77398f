import numpy as np
import pytest

from specklekit.distributions import make_rng

TEST_SEED = 20240601


@pytest.fixture
def rng():
    return make_rng(TEST_SEED)


def table1_models(L):
    from specklekit.distributions import G0
    from specklekit.phantom import TABLE1
    return [G0(a, g, L) for a, g in TABLE1.values()]


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
