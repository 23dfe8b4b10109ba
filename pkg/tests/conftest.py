import numpy as np
import pytest

from qlorenz.dynamics import LorenzParams


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def params():
    return LorenzParams(10.0, 28.0, 0.55)


def rel_err(a, b, floor=1e-300):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))
