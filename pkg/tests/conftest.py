import numpy as np
import pytest

from deltavisc.config import RunConfig
from deltavisc.model import MarketParams


@pytest.fixture
def market():
    return MarketParams()


@pytest.fixture
def linear_market():
    return MarketParams(a=0.0)


@pytest.fixture
def small_config():
    # coarse enough to run in well under a second
    return RunConfig(nx=161, nt=40, eps=0.05, T=0.2, dt_out=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
