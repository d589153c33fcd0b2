import numpy as np
import pytest

from nematicfilm.potential import PotentialParams, calibrate_wmin


def make_default_params():
    """Desk-scale low-temperature parameter set used across the tests.

    a < 0, b < 0, c > 0 puts the bulk in the uniaxial regime
    (s* ~ 0.911); beta = -0.1 makes the boundary data an in-plane
    uniaxial state of strength 0.3, closer to the in-plane circle well
    than to the z-axis well.
    """
    return PotentialParams(
        a=-1.0, b=-4.0, c=4.0, gamma_s=4.0, beta=-0.1, variant="reduced"
    )


@pytest.fixture(scope="session")
def default_params():
    p = make_default_params()
    calibrate_wmin(p, starts=200, seed=0)
    return p


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
