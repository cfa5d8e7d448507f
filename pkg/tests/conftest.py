import numpy as np
import pytest

from ris_t2u.scenario import RadioParams, ScenarioConfig


@pytest.fixture
def radio():
    return RadioParams()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def single_vue_config(n=64, r=100.0, az_deg=0.0, **kw):
    return ScenarioConfig(num_vues=1, bs_elements=n, vue_placement="fixed", vue_ranges_m=(r,),
                          vue_azimuths_deg=(az_deg,), **kw)
