import numpy as np
import pytest
from hypothesis import settings

from doublecl.decoherence import BASE_OSCILLATORS, coupling_form, reservoir_for
from doublecl.model import ModelParams

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def fig_model(form="qq_pp", lam=0.1, topology="distinct"):
    return ModelParams(BASE_OSCILLATORS, coupling_form(form, lam), reservoir_for(topology))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
