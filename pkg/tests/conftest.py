"""Session-scoped fixtures for expensive artifacts (cycles, policies)."""

import numpy as np
import pytest

import banglearn as bl
from banglearn.scenarios import build_policy, scenario_config


@pytest.fixture(scope="session")
def thalamic_model():
    return bl.thalamic()


@pytest.fixture(scope="session")
def thalamic_cycle(thalamic_model):
    return bl.find_limit_cycle(thalamic_model)


@pytest.fixture(scope="session")
def thalamic_prc(thalamic_model, thalamic_cycle):
    # impulse large enough that the finite-difference derivative is smooth
    return bl.compute_prc_direct(thalamic_model, thalamic_cycle,
                                 impulse=0.05, dt=5e-3)


@pytest.fixture(scope="session")
def radial_cycle():
    return bl.find_limit_cycle(bl.radial_clock(), n_phases=64)


@pytest.fixture(scope="session")
def duffing_policy():
    cfg = scenario_config("duffing")
    return cfg, build_policy(cfg)


@pytest.fixture(scope="session")
def lorenz_policy():
    cfg = scenario_config("lorenz")
    return cfg, build_policy(cfg)


@pytest.fixture(scope="session")
def hh_policy():
    cfg = scenario_config("reduced_hh")
    return cfg, build_policy(cfg)


def harmonic_oscillator():
    """v'' = -v realized as (v, w): first coordinate traces sin(t) from (0, 1)."""
    return bl.Model(
        name="harmonic",
        dimension=2,
        params=None,
        drift=lambda x: np.stack([x[..., 1], -x[..., 0]], axis=-1),
        default_dt=1e-3,
    )
