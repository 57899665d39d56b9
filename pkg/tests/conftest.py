import pytest
from hypothesis import settings

from stratsim.scenarios import make_prop4_instance, make_stylized, s1_params
from stratsim.stability import DominanceParams

settings.register_profile("stratsim", derandomize=True, deadline=None, max_examples=40)
settings.load_profile("stratsim")


@pytest.fixture(name="s1_params")
def _s1_params():
    return s1_params()


@pytest.fixture
def s1(s1_params):
    return make_stylized(s1_params, "s1")


@pytest.fixture
def prop4():
    """(instância calibrada, repeso de toxicidade)."""
    return make_prop4_instance()


@pytest.fixture
def default_params():
    return DominanceParams()
