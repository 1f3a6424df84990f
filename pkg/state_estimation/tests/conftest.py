import pytest

from state_estimation.services.network_model import make_params


@pytest.fixture
def reference_params():
    """K=3, h=0.5, sigma_x2=1: the configuration most hand-checked values use."""
    return make_params(3, 0.5, 1.0)


@pytest.fixture
def degenerate_params():
    """K=3, h=0.25: sqrt(h) equals beta/alpha, so d_min == d_max."""
    return make_params(3, 0.25, 1.0)


@pytest.fixture
def outer_params():
    """A configuration where the outer-bound estimator family is feasible."""
    return make_params(8, 0.5, 4.0)
