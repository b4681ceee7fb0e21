from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from l0conic.model import SparsityPriors, build_instance

DATA = Path(__file__).parent / "data"

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def example1():
    return build_instance(np.array([0.4, 1.0]), lam=0.5, priors=SparsityPriors.regularized(0.5))


@pytest.fixture
def example2():
    return build_instance(np.array([0.3, 0.7, 1.0]), lam=1.0, priors=SparsityPriors.regularized(0.5))


@pytest.fixture
def data_dir():
    return DATA
