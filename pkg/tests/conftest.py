import numpy as np
import pytest

from ssep.params import ModelParams


@pytest.fixture
def params_n6():
    return ModelParams.mirrored(N=6, theta=0.5, r=1.0, rho_bar=0.2, b=0.5,
                                c=0.3, rho_bar_prime=0.9)


@pytest.fixture
def params_n8():
    return ModelParams.mirrored(N=8, theta=0.5, r=1.0, rho_bar=0.3, b=0.5,
                                c=0.3, rho_bar_prime=0.7)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
