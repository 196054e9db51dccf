import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eddpc.lti import LtiSystem, collect, random_system  # noqa: E402


@pytest.fixture
def integrator():
    return LtiSystem(np.eye(1), np.eye(1), np.eye(1))


@pytest.fixture
def integrator_data(integrator):
    rng = np.random.default_rng(7)
    from eddpc.lti import simulate
    return simulate(integrator, [0.3], rng.uniform(-1, 1, (12, 1)))


@pytest.fixture
def sys4():
    return random_system(4, 2, 2, seed=0)


@pytest.fixture
def long_data4(sys4):
    return collect(sys4, 60, seed=1)
