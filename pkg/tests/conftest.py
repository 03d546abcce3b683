import numpy as np
import pytest
from hypothesis import settings

from bcplab.instances import n1, n2

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def net1():
    return n1(theta1=-1.0)


@pytest.fixture
def net2():
    return n2()


@pytest.fixture
def htd1(net1):
    return net1.analyze()


@pytest.fixture
def htd2(net2):
    return net2.analyze()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
