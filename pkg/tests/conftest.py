import numpy as np
import pytest

from mvlda.covariance import EpochSet
from mvlda.linalg import spd_factorize
from mvlda.synth import MatrixNormalSpec, make_rng, random_spd, sample_matrix_normal


def rel(a, b):
    """Relative Frobenius distance of ``a`` from ``b``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(float).tiny)


def make_instance(k, j, n1, n2, seed, shift=1.0):
    """Seeded matrix-normal two-class data with random SPD factors and means."""
    rng = make_rng(seed)
    s_l = spd_factorize(random_spd(k, rng))
    s_r = random_spd(j, rng)
    s_r = spd_factorize(s_r / np.linalg.norm(s_r))
    mu1 = shift * rng.standard_normal((k, j))
    mu2 = np.zeros((k, j))
    spec = MatrixNormalSpec(mu1, mu2, s_l, s_r, n1, n2, seed + 1000)
    return sample_matrix_normal(spec), spec


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def scalar_epochs():
    # class 1 = {0, 2}, class 2 = {10, 12}
    return EpochSet(np.array([0.0, 2.0, 10.0, 12.0]).reshape(4, 1, 1), [1, 1, 2, 2])


@pytest.fixture
def small_instance():
    return make_instance(4, 5, 30, 30, seed=7)
