import numpy as np
import pytest

from latent_hi.cmapss import Trajectory
from latent_hi.synthetic import write_synthetic_cmapss


def make_traj(unit_id, length, seed=0, n_cond=1):
    rng = np.random.default_rng([seed, unit_id])
    settings = np.tile([0.0, 0.0, 100.0], (length, 1)) + rng.normal(0, 1e-3, (length, 3))
    sensors = rng.normal(size=(length, 21)) + np.linspace(0, 1, length)[:, None]
    sensors[:, 0] = 518.67
    return Trajectory(unit_id, settings, sensors)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_cmapss(tmp_path_factory):
    """Down-sized synthetic FD001 (20 train / 10 test units)."""
    d = tmp_path_factory.mktemp("cmapss")
    write_synthetic_cmapss(d, "FD001", n_train=20, n_test=10, seed=3)
    return d
