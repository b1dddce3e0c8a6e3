import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import degenerate, exact_log_posterior, fd_hessian, gauss_expect, grid_argmax, synthetic_2d
from underwrite.bayes import (
    GaussianPosterior,
    GaussianPrior,
    LabeledObservation,
    PosteriorBank,
    laplace,
    map_fit,
    predictive_default_prob,
    sample,
    sample_many,
    stack_observations,
)
from underwrite.errors import ConvergenceError, NumericalError
from underwrite.model import sigmoid


def bisect(f, lo, hi, tol=1e-14):
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_empty_data_returns_prior():
    prior = GaussianPrior.standard(3)
    theta, H = map_fit(np.empty((0, 3)), np.empty(0), prior)
    assert np.array_equal(theta, np.zeros(3))
    assert np.array_equal(H, np.eye(3))
    post = laplace(theta, H)
    np.testing.assert_array_equal(post.mean, prior.mean)
    np.testing.assert_allclose(post.covariance, prior.covariance, atol=1e-15)


def test_nonstandard_prior_reproduced_with_no_data():
    prior = GaussianPrior(np.array([0.5, -1.0]), np.array([[2.0, 0.3], [0.3, 0.5]]))
    post = laplace(*map_fit(np.empty((0, 2)), np.empty(0), prior))
    np.testing.assert_allclose(post.mean, prior.mean, atol=1e-14)
    np.testing.assert_allclose(post.covariance, prior.covariance, rtol=1e-12)


def test_single_observation_matches_bisection():
    root = bisect(lambda t: (1 - 1 / (1 + math.exp(-t))) - t, -5.0, 5.0)
    theta, _ = map_fit(np.array([[1.0]]), np.array([1.0]), GaussianPrior.standard(1))
    assert theta[0] == pytest.approx(root, abs=1e-10)
    assert root == pytest.approx(0.401058137541547, abs=1e-12)


def test_labeled_observations_stack():
    obs = [LabeledObservation(np.array([1.0]), True)]
    X, y = stack_observations(obs, 1)
    theta, _ = map_fit(X, y, GaussianPrior.standard(1))
    assert theta[0] == pytest.approx(0.401058137541547, abs=1e-10)


def test_two_dim_map_matches_coarse_grid():
    X, y = synthetic_2d()
    theta, _ = map_fit(X, y, GaussianPrior.standard(2))
    np.testing.assert_allclose(theta, grid_argmax(X, y, step=1e-2), atol=1e-2)


def test_gradient_tolerance_reached():
    X, y = synthetic_2d(n=200, seed=3)
    prior = GaussianPrior.standard(2)
    theta, H = map_fit(X, y, prior)
    grad = X.T @ (y - sigmoid(X @ theta)) - theta
    assert np.max(np.abs(grad)) <= 1e-8
    p = sigmoid(X @ theta)
    np.testing.assert_allclose(H, np.eye(2) + (X.T * (p * (1 - p))) @ X, rtol=1e-12)


def test_laplace_diagonal():
    post = laplace(np.zeros(2), np.diag([4.0, 1.0]))
    np.testing.assert_allclose(post.covariance, np.diag([0.25, 1.0]), atol=1e-15)
    post = laplace(np.zeros(3), np.eye(3))
    np.testing.assert_allclose(post.covariance, np.eye(3), atol=1e-15)


def test_laplace_covariance_matches_fd_hessian():
    X, y = synthetic_2d()
    theta, H = map_fit(X, y, GaussianPrior.standard(2))
    post = laplace(theta, H)
    H_fd = -fd_hessian(lambda t: exact_log_posterior(t, X, y), theta)
    np.testing.assert_allclose(post.covariance, np.linalg.inv(H_fd), rtol=1e-4)


def test_chol_reproduces_covariance():
    X, y = synthetic_2d(n=50, seed=11)
    post = laplace(*map_fit(X, y, GaussianPrior.standard(2)))
    rel = np.linalg.norm(post.chol @ post.chol.T - post.covariance) / np.linalg.norm(post.covariance)
    assert rel < 1e-10
    assert np.allclose(post.chol, np.tril(post.chol))


def test_laplace_rejects_indefinite():
    with pytest.raises(NumericalError):
        laplace(np.zeros(2), np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_convergence_error_carries_iterate():
    X, y = synthetic_2d()
    with pytest.raises(ConvergenceError) as info:
        map_fit(X, y, GaussianPrior.standard(2), max_iter=0)
    assert info.value.iterate is not None and info.value.grad_norm > 1e-8


def test_sample_degenerate(rng):
    mean = np.array([0.3, -1.2, 2.0])
    assert np.allclose(sample(degenerate(mean), rng), mean, atol=1e-8)


def test_sample_moments(rng):
    post = GaussianPosterior.from_moments(np.zeros(3), np.eye(3))
    draws = sample_many(post, 100_000, rng)
    assert np.all(np.abs(draws.mean(axis=0)) < 0.02)
    assert np.all(np.abs(np.cov(draws.T) - np.eye(3)) < 0.05)


def test_sample_deterministic():
    post = GaussianPosterior.from_moments(np.ones(2), np.array([[1.0, 0.5], [0.5, 2.0]]))
    a = [sample(post, np.random.default_rng(5)) for _ in range(2)]
    np.testing.assert_array_equal(a[0], a[1])


def test_predictive_degenerate(rng):
    assert predictive_default_prob(degenerate([2.0, -1.0]), np.array([1.0, 2.0]), 10, rng) == pytest.approx(0.5, abs=1e-8)


def test_predictive_symmetric(rng):
    S = 100_000
    post = GaussianPosterior.from_moments(np.zeros(1), np.eye(1))
    p = predictive_default_prob(post, np.array([1.0]), S, rng)
    se = np.sqrt(gauss_expect(lambda t: sigmoid(t) ** 2, 0.0, 1.0) - 0.25) / np.sqrt(S)
    assert abs(p - 0.5) < 3 * se


def test_predictive_matches_quadrature(rng):
    post = GaussianPosterior.from_moments(np.ones(1), 0.25 * np.eye(1))
    p = predictive_default_prob(post, np.array([1.0]), 100_000, rng)
    assert p == pytest.approx(gauss_expect(sigmoid, 1.0, 0.25), abs=5e-3)


def test_predictive_consistent_with_point_probability(rng):
    mean = np.array([0.4, -0.7])
    x = np.array([1.0, 1.5])
    assert predictive_default_prob(degenerate(mean), x, 1000, rng) == pytest.approx(sigmoid(mean @ x), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_warm_start_invariance(start):
    X, y = synthetic_2d(n=40, seed=2)
    prior = GaussianPrior.standard(2)
    a, _ = map_fit(X, y, prior)
    b, _ = map_fit(X, y, prior, warm_start=np.array(start))
    np.testing.assert_allclose(a, b, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 30), st.integers(0, 10_000))
def test_duplicated_data_contracts(n, seed):
    r = np.random.default_rng(seed)
    X = r.standard_normal((n, 3))
    y = (r.random(n) < 0.4).astype(float)
    prior = GaussianPrior.standard(3)
    one = laplace(*map_fit(X, y, prior))
    two = laplace(*map_fit(np.vstack([X, X]), np.concatenate([y, y]), prior))
    assert np.all(np.diag(two.covariance) <= np.diag(one.covariance) * (1 + 1e-12))


def test_bank_sampling_shapes(rng):
    bank = PosteriorBank.from_prior(GaussianPrior.standard(4), 3)
    assert bank.sample(rng).shape == (3, 4)
    assert bank.sample_many(7, rng).shape == (7, 3, 4)
    assert bank.means().shape == (3, 4)
