import numpy as np
import pytest

from mvlda.covariance import EpochSet, flip_flop
from mvlda.discriminant import fit, mahalanobis_decomposition
from mvlda.errors import DimensionError, ValidationError
from mvlda.linalg import spd_factorize, vec_t
from mvlda.synth import (
    MatrixNormalSpec,
    ar1_covariance,
    brute_force_discriminant,
    make_rng,
    planted_difference,
    random_spd,
    sample_matrix_normal,
)

from conftest import make_instance, rel


def _spec(k, j, n1, n2, seed, rng_seed=0):
    rng = make_rng(rng_seed)
    s_l = random_spd(k, rng)
    s_r = random_spd(j, rng)
    s_r /= np.linalg.norm(s_r)
    zero = np.zeros((k, j))
    return MatrixNormalSpec(zero, zero, spd_factorize(s_l), spd_factorize(s_r), n1, n2, seed)


def test_same_seed_same_bits():
    spec = _spec(3, 4, 5, 6, seed=99)
    a, b = sample_matrix_normal(spec), sample_matrix_normal(spec)
    assert a.trials.tobytes() == b.trials.tobytes()
    assert a.labels.tolist() == [1] * 5 + [2] * 6
    c = sample_matrix_normal(_spec(3, 4, 5, 6, seed=100))
    assert c.trials.tobytes() != a.trials.tobytes()


def test_identity_factors_give_iid_entries():
    k, j = 3, 4
    spec = MatrixNormalSpec(np.zeros((k, j)), np.zeros((k, j)),
                            spd_factorize(np.eye(k) * np.sqrt(j)),
                            spd_factorize(np.eye(j) / np.sqrt(j)), 4000, 4000, 1)
    x = sample_matrix_normal(spec).trials
    assert np.var(x) == pytest.approx(1.0, rel=0.02)
    assert abs(np.mean(x)) < 0.01


def test_empirical_covariance_is_kronecker():
    spec = _spec(2, 2, 25000, 25000, seed=5)
    x = sample_matrix_normal(spec).trials.reshape(50000, 4)
    emp = x.T @ x / x.shape[0]
    truth = np.kron(spec.sigma_l.matrix, spec.sigma_r.matrix)
    assert rel(emp, truth) < 0.02


def test_linear_transform_property():
    rng = make_rng(8)
    spec = _spec(2, 3, 5000, 5000, seed=9)
    a, b = rng.standard_normal((2, 2)), rng.standard_normal((3, 3))
    x = sample_matrix_normal(spec).trials
    y = a @ x @ b.T
    s_l = a @ spec.sigma_l.matrix @ a.T
    s_r = b @ spec.sigma_r.matrix @ b.T
    spec2 = MatrixNormalSpec(np.zeros((2, 3)), np.zeros((2, 3)), spd_factorize(s_l),
                             spd_factorize(s_r), 5000, 5000, seed=10)
    z = sample_matrix_normal(spec2).trials
    truth = np.kron(s_l, s_r)
    for sample in (y, z):
        flat = sample.reshape(-1, 6)
        assert np.max(np.abs(flat.mean(axis=0))) < 0.05 * np.sqrt(np.max(np.diag(truth)))
        assert rel(flat.T @ flat / flat.shape[0], truth) < 0.05


def test_spec_validation():
    f2, f3 = spd_factorize(np.eye(2)), spd_factorize(np.eye(3))
    with pytest.raises(DimensionError):
        MatrixNormalSpec(np.zeros((3, 2)), np.zeros((2, 3)), f2, f3, 1, 1)
    with pytest.raises(ValidationError):
        MatrixNormalSpec(np.zeros((2, 3)), np.zeros((2, 3)), f2, f3, 0, 1)


def test_planted_difference_is_metric_orthonormal():
    rng = make_rng(1)
    s_l = spd_factorize(ar1_covariance(5, 0.5))
    s_r = spd_factorize(ar1_covariance(4, 0.3))
    delta = planted_difference([25.0, 9.0, 1.0], s_l, s_r, rng)
    m, d = s_r.inverted(), s_l.inverted()
    w = d.sqrt @ delta @ m.sqrt
    np.testing.assert_allclose(np.linalg.svd(w, compute_uv=False)[:3] ** 2,
                               [25.0, 9.0, 1.0], rtol=1e-12)
    with pytest.raises(ValidationError):
        planted_difference([1.0] * 5, s_l, s_r, rng)
    with pytest.raises(ValidationError):
        planted_difference([-1.0], s_l, s_r, rng)


def test_brute_force_scalar(scalar_epochs):
    out = brute_force_discriminant(scalar_epochs)
    np.testing.assert_allclose(out.lam, [100.0], rtol=1e-13)
    assert out.total == pytest.approx(100.0, rel=1e-13)


def test_brute_force_equal_means():
    t = np.array([0.0, 2.0, 0.0, 2.0]).reshape(4, 1, 1)
    out = brute_force_discriminant(EpochSet(t, [1, 1, 2, 2]))
    assert out.lam.size == 0 and out.total == 0.0


def test_brute_force_matches_main_path():
    epochs, _ = make_instance(3, 4, 20, 20, seed=31)
    out = brute_force_discriminant(epochs)
    model = fit(epochs, flip_flop(epochs))
    np.testing.assert_allclose(np.sort(out.lam), np.sort(model.lam), rtol=1e-9)
    assert out.total == pytest.approx(mahalanobis_decomposition(model)[1], rel=1e-9)
    # the dense axes are unit vectors under the inverse covariance and match u_q (x) v_q
    full = np.kron(model.s_l, model.s_r)
    gram = out.axes @ np.linalg.solve(full, out.axes.T)
    np.testing.assert_allclose(gram, np.eye(model.Q), atol=1e-9)
    for q in range(model.Q):
        ax = np.kron(model.u[:, q], model.v[:, q])
        assert min(rel(out.axes[q], ax), rel(-out.axes[q], ax)) < 1e-8
    d = vec_t(model.delta)
    coords = out.axes @ np.linalg.solve(full, d)
    np.testing.assert_allclose(coords ** 2, out.lam, rtol=1e-9)


def test_brute_force_size_limit():
    epochs = EpochSet(np.zeros((2, 21, 20)), [1, 2])
    with pytest.raises(DimensionError):
        brute_force_discriminant(epochs)
