import numpy as np
import pytest

from tilq.fixtures import example_1_1, example_5_1, example_5_2, example_5_3


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def ex11():
    return example_1_1()


@pytest.fixture(scope="session")
def ex51():
    return example_5_1()


@pytest.fixture(scope="session")
def ex52():
    return example_5_2()


@pytest.fixture(scope="session")
def ex53():
    return example_5_3()


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])
