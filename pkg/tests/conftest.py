import numpy as np
import pytest

from mopoisson import benchmark_problem, shared_system


@pytest.fixture
def rng():
    return np.random.default_rng(170381)


@pytest.fixture(scope="session")
def bench():
    """The two-point benchmark problem with lambda = (0.1, 0.1)."""
    return benchmark_problem(0.1, 0.1)


@pytest.fixture(scope="session")
def system_for():
    """Level -> (mesh, stiffness system), shared across the session."""
    return shared_system
