import numpy as np
import pytest

from imlmi.dgp import DgpSpec, response, sample, toeplitz_sigma
from imlmi.rng import Seed


def test_toeplitz_entries():
    assert np.array_equal(toeplitz_sigma(2, 0.5), [[1, 0.5], [0.5, 1]])
    assert np.array_equal(toeplitz_sigma(3, 0.0), np.eye(3))
    assert toeplitz_sigma(4, 0.5)[0, 3] == 0.125


def test_linear_response_without_noise():
    d = sample(DgpSpec("linear", noise_sd=0.0), 200, Seed(1))
    X = d.values[:, :4]
    assert np.allclose(d.y(), X[:, 0] - X[:, 1], atol=0, rtol=0)
    assert response("linear", np.array([[2.0, 1.0, 0.0, 0.0]]))[0] == 1.0


def test_nonlinear_response_example():
    assert response("nonlinear", np.array([[0.0, 1.0, 2.0, 10.0]]))[0] == 21.0


def test_nonlinear_sqrt_is_clamped():
    X = np.array([[0.0, 3.0, 0.0, 0.0]])
    assert np.isfinite(response("nonlinear", X)).all()


def test_sample_covariance_matches_sigma():
    d = sample(DgpSpec("linear"), 100_000, Seed(5))
    X = d.values[:, :4]
    C = np.corrcoef(X, rowvar=False)
    assert abs(C[0, 1] - 0.5) < 0.02
    assert np.all(np.abs(X.var(axis=0) - 1) < 0.02)
    assert np.abs(np.cov(X, rowvar=False) - toeplitz_sigma(4, 0.5)).max() < 0.03


def test_layout_and_determinism():
    a = sample(DgpSpec("nonlinear"), 50, Seed(3))
    b = sample(DgpSpec("nonlinear"), 50, Seed(3))
    assert a.col_names == ("X1", "X2", "X3", "X4", "Y") and a.target_idx == 4
    assert np.array_equal(a.values, b.values)
    assert a.complete


def test_invalid_spec():
    with pytest.raises(ValueError):
        DgpSpec("quadratic")
    with pytest.raises(ValueError):
        DgpSpec("linear", rho=1.5)
