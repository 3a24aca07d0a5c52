import numpy as np
import pytest

from tomokin.numerics import Grid1D


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def box128():
    return Grid1D.centered(9.0, 128)
