import warnings

import numpy as np
import pytest

from heatbench.config import preset
from heatbench.data import resample_900s, split_and_filter, synthesize_prices, synthesize_weather
from heatbench.heatpump import HeatPumpParams
from heatbench.thermal import building_preset


@pytest.fixture(scope="session")
def old_building():
    return building_preset("old")


@pytest.fixture(scope="session")
def efficient_building():
    return building_preset("efficient")


@pytest.fixture(scope="session")
def hp():
    return HeatPumpParams()


@pytest.fixture(scope="session")
def weather_900():
    """Two synthetic years on the simulation grid (2015 train / 2016 test)."""
    return resample_900s(synthesize_weather([2015, 2016], seed=0))


@pytest.fixture(scope="session")
def prices_900():
    return resample_900s(synthesize_prices([2015, 2016], seed=0))


@pytest.fixture(scope="session")
def small_split(weather_900):
    """Short windows (300 steps + 8 forecast) for fast environment tests."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return split_and_filter(weather_900, [2015], [2016], window_len=308)


@pytest.fixture(scope="session")
def small_split_dr(weather_900, prices_900):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return split_and_filter(weather_900, [2015], [2016], window_len=380,
                                prices=prices_900)


@pytest.fixture(scope="session")
def old_cfg():
    return preset("old")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
