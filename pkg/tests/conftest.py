import numpy as np
import pytest

from vmfb import Metric


def random_spd(rng, dim, lo=0.5, hi=3.0):
    """SPD matrix with eigenvalues in [lo, hi]; well conditioned by design."""
    Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    evals = rng.uniform(lo, hi, size=dim)
    mat = (Q * evals) @ Q.T
    return 0.5 * (mat + mat.T)


def random_metric(rng, dim, lo=0.5, hi=3.0):
    return Metric(random_spd(rng, dim, lo, hi))


def random_diag_metric(rng, dim, lo=0.5, hi=3.0):
    return Metric.from_diagonal(rng.uniform(lo, hi, size=dim))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
