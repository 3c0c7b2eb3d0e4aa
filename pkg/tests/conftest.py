import logging

import numpy as np
import pytest

from lowrank.misc import make_rng


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture(autouse=True)
def detach_package_handlers():
    """The CLI attaches handlers to the package logger; drop them between tests."""
    yield
    logger = logging.getLogger('lowrank')
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)


def orthonormal(rng, m, k):
    return np.linalg.qr(rng.standard_normal((m, k)))[0]


def low_rank(rng, m, n, sigma):
    k = len(sigma)
    return (orthonormal(rng, m, k) * np.asarray(sigma)) @ orthonormal(rng, n, k).T
