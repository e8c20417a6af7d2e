import numpy as np
import pytest

import seeplan as sp
from seeplan.model import LINKS


@pytest.fixture(scope="session")
def default_params():
    return sp.default_params()


@pytest.fixture(scope="session")
def default_space(default_params):
    return sp.enumerate_states(default_params)


@pytest.fixture(scope="session")
def default_kernel(default_space, default_params):
    return sp.build_kernel(default_space, default_params)


@pytest.fixture(scope="session")
def default_rewards(default_space, default_params):
    return sp.build_reward_table(default_space, default_params)


@pytest.fixture(scope="session")
def tiny_params():
    """Smallest nontrivial instance: one gain level, 1-unit batteries,
    two power levels, two slots, fair harvest coins."""
    return sp.default_params(
        gain_levels={link: (3.311e-13,) for link in LINKS},
        gain_transition={link: np.array([[1.0]]) for link in LINKS},
        power_levels=(0.0, 0.5e-3),
        harvest_units_src=1,
        harvest_units_dst=1,
        battery_cap_src=1,
        battery_cap_dst=1,
        horizon=2,
    )


@pytest.fixture(scope="session")
def tiny_space(tiny_params):
    return sp.enumerate_states(tiny_params)


@pytest.fixture(scope="session")
def tiny_kernel(tiny_space, tiny_params):
    return sp.build_kernel(tiny_space, tiny_params)


@pytest.fixture(scope="session")
def tiny_rewards(tiny_space, tiny_params):
    return sp.build_reward_table(tiny_space, tiny_params)
