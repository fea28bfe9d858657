import numpy as np
import pytest

from ifs_coupler import densities, families


@pytest.fixture
def halving():
    return families.halving()


@pytest.fixture
def tilted():
    return families.halving(density=densities.tilted(1.0, 0.2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(test_acceptance.RESULTS[k])
