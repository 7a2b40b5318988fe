import math

import numpy as np
import pytest

from odeco_feedback.tensor import planar_example

THETA = math.pi / 6


@pytest.fixture
def planar():
    return planar_example()


@pytest.fixture
def v1():
    return np.array([math.cos(THETA), math.sin(THETA)])


@pytest.fixture
def v2():
    return np.array([-math.sin(THETA), math.cos(THETA)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
