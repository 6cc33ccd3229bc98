import pytest

from prophet_order.distributions import Instance, TimeGrid, Uniform, level_functions, pt_hard_instance
from prophet_order.scheme import build_two_scheme


@pytest.fixture(scope="session")
def grid():
    return TimeGrid.uniform()


@pytest.fixture(scope="session")
def iid2():
    return Instance((Uniform(0, 1), Uniform(0, 1)))


@pytest.fixture(scope="session")
def iid2_levels(iid2, grid):
    return level_functions(iid2, grid)


@pytest.fixture(scope="session")
def pt_hard():
    return pt_hard_instance(1000)


@pytest.fixture(scope="session")
def pt_hard_levels(pt_hard, grid):
    return level_functions(pt_hard, grid)


@pytest.fixture(scope="session")
def pt_hard_built(pt_hard):
    return build_two_scheme(pt_hard)


@pytest.fixture(scope="session")
def iid2_built(iid2):
    return build_two_scheme(iid2)


# -- acceptance summary --------------------------------------------------------
# test_acceptance records one line per criterion here; the lines are echoed in
# the terminal summary so they appear even when output capture is on.

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
