import logging
from importlib import resources

import numpy as np
import pytest

from eventfusion import create_harness

DATA_DIR = resources.files('eventfusion') / 'data'


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def dataset1_path():
    return str(DATA_DIR / 'dataset1.defs')


@pytest.fixture
def dataset2_path():
    return str(DATA_DIR / 'dataset2.defs')


@pytest.fixture
def scenario_path():
    return str(DATA_DIR / 'correlated_scenario.json')


@pytest.fixture
def harness():
    """Settings with logging on stderr only, at DEBUG."""
    config = create_harness(test_config={'LOG_LEVEL': 'DEBUG'})
    yield config
    logging.getLogger('eventfusion').setLevel(logging.WARNING)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

