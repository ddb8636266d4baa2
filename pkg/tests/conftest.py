import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def max_abs(a, b=0.0):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())
