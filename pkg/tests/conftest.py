import numpy as np
import pytest

from stackedge.experiments import ScenarioSpec, sample_profiles
from stackedge.model import MarketParams


@pytest.fixture
def params():
    return MarketParams()


@pytest.fixture
def default_sizes():
    """Block sizes of the default 100-miner scenario, replication 0."""
    return np.array([m.block_size for m in sample_profiles(ScenarioSpec())])


@pytest.fixture
def rng():
    return np.random.default_rng(20171)


def random_instance(rng, n_low=2, n_high=20, t_low=50.0, t_high=400.0):
    n = int(rng.integers(n_low, n_high + 1))
    return rng.uniform(t_low, t_high, n)


# (criterion, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {number:>2}: {detail}")
