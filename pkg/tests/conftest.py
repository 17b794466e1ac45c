import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flyingatom.config import SimulationConfig
from flyingatom.propagator import Grid, initial_state

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# lines recorded by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_config():
    """Fast E_K = 40 transit on a coarse grid."""
    return SimulationConfig(e_k=40.0, n_x=1024, x_min=-9.0, x_max=9.0, n_phot=4, n_guard=6, n_outputs=10)


@pytest.fixture
def small_state(small_config):
    grid = Grid.from_config(small_config)
    return initial_state(grid, small_config)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
