import numpy as np
import pytest

from rotbandit.core import make_rng


@pytest.fixture
def rng():
    return make_rng(1234, "tests")


def gaussian_stream(seed, n, sigma=1.0):
    return make_rng(seed, "stream").standard_normal(n) * sigma
