import numpy as np
import pytest

from rscat import GridSpec, MigrSpec, ball_indicator_field, gaussian_bump_field


@pytest.fixture
def grid16():
    return GridSpec.centered(16, 2.0 / 16)


@pytest.fixture
def grid32():
    return GridSpec.centered(32, 2.0 / 32)


@pytest.fixture
def bump_spec(grid16):
    mu = gaussian_bump_field(grid16, (0.0, 0.0, 0.0), 1.0, 0.14, cutoff_radii=3.0)
    return MigrSpec(order=2.5, strength=mu)


@pytest.fixture
def ball_spec32(grid32):
    mu = ball_indicator_field(grid32, (0.0, 0.0, 0.0), 0.55, 1.0)
    return MigrSpec(order=2.5, strength=mu)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
