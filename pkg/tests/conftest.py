import warnings

import pytest
from hypothesis import HealthCheck, settings

from cpsr import scenarios

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def rb():
    return scenarios.builtin("rb_fig2")


@pytest.fixture(scope="session")
def k():
    return scenarios.builtin("k_fig4")


@pytest.fixture(scope="session")
def rb_rates(rb):
    return rb.rates


@pytest.fixture
def no_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        yield
