"""Per-context Bayesian logistic regression with a Laplace posterior.

Each borrower group owns an independent d-dimensional Gaussian posterior.
Fitting is damped Newton on the log posterior; the covariance is the
inverse of the negative Hessian at the MAP.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConvergenceError, DimensionError, NumericalError
from .model import sigmoid

MAX_NEWTON_ITER = 100
GRAD_TOL = 1e-8


def cholesky_jitter(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying with 1e-10..1e-6 added to the diagonal."""
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(a.shape[0])
    jitter = 1e-10
    while jitter <= 1e-6 * (1 + 1e-9):
        try:
            return np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10
    raise NumericalError("matrix is not positive definite (Cholesky failed with jitter up to 1e-6)")


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (len(mean), len(mean)):
            raise DimensionError("prior covariance does not match mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        # precision is needed on every Newton step
        factor = cho_factor(cov, lower=True)
        object.__setattr__(self, "precision", cho_solve(factor, np.eye(len(mean))))

    @classmethod
    def standard(cls, d: int) -> "GaussianPrior":
        return cls(np.zeros(d), np.eye(d))

    @property
    def d(self) -> int:
        return len(self.mean)


@dataclass(frozen=True, eq=False)
class LabeledObservation:
    features: np.ndarray
    defaulted: bool


def stack_observations(observations: Sequence[LabeledObservation], d: int):
    if not observations:
        return np.empty((0, d)), np.empty(0)
    X = np.vstack([np.asarray(o.features, dtype=float) for o in observations])
    if X.shape[1] != d:
        raise DimensionError(f"observation dimension {X.shape[1]} != {d}")
    y = np.array([float(o.defaulted) for o in observations])
    return X, y


def log_posterior(theta, X, y, prior: GaussianPrior) -> float:
    """Unnormalized log posterior of one context's parameters."""
    m = X @ theta
    diff = theta - prior.mean
    return float(np.sum(y * m - np.logaddexp(0.0, m)) - 0.5 * diff @ prior.precision @ diff)


def map_fit(X, y, prior: GaussianPrior, warm_start=None, max_iter=MAX_NEWTON_ITER, tol=GRAD_TOL):
    """Maximize the log posterior by damped Newton.

    ``X`` is (n, d), ``y`` holds 0/1 default indicators. Returns
    ``(map, neg_hessian)`` with the negative Hessian evaluated at the MAP.
    """
    X = np.asarray(X, dtype=float).reshape(-1, prior.d)
    y = np.asarray(y, dtype=float)
    if len(y) != len(X):
        raise DimensionError("features and labels differ in length")
    theta = prior.mean.copy() if warm_start is None else np.array(warm_start, dtype=float)
    P0 = prior.precision

    obj = log_posterior(theta, X, y, prior)
    for _ in range(max_iter + 1):
        p = sigmoid(X @ theta)
        grad = X.T @ (y - p) - P0 @ (theta - prior.mean)
        neg_hess = P0 + (X.T * (p * (1.0 - p))) @ X
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= tol:
            return theta, neg_hess
        step = cho_solve(cho_factor(neg_hess, lower=True), grad)
        t = 1.0
        while True:
            cand = theta + t * step
            cand_obj = log_posterior(cand, X, y, prior)
            # tolerate roundoff-level decreases near the optimum
            if cand_obj >= obj - 1e-12 * max(1.0, abs(obj)) or t < 1e-10:
                break
            t *= 0.5
        theta, obj = cand, cand_obj
    raise ConvergenceError(
        f"Newton did not converge in {max_iter} iterations (max |grad| = {gnorm:.3e})",
        iterate=theta,
        grad_norm=gnorm,
    )


@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    mean: np.ndarray
    covariance: np.ndarray
    chol: np.ndarray

    @classmethod
    def from_moments(cls, mean, covariance) -> "GaussianPosterior":
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(covariance, dtype=float)
        if cov.shape != (len(mean), len(mean)):
            raise DimensionError("covariance does not match mean")
        return cls(mean, cov, cholesky_jitter(cov))

    @classmethod
    def from_prior(cls, prior: GaussianPrior) -> "GaussianPosterior":
        return cls.from_moments(prior.mean, prior.covariance)

    @property
    def d(self) -> int:
        return len(self.mean)


def laplace(map_estimate, neg_hessian) -> GaussianPosterior:
    neg_hessian = np.asarray(neg_hessian, dtype=float)
    L = cholesky_jitter(neg_hessian)
    cov = cho_solve((L, True), np.eye(len(L)))
    cov = 0.5 * (cov + cov.T)
    return GaussianPosterior.from_moments(map_estimate, cov)


def sample(posterior: GaussianPosterior, rng: np.random.Generator) -> np.ndarray:
    return posterior.mean + posterior.chol @ rng.standard_normal(posterior.d)


def sample_many(posterior: GaussianPosterior, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, d) independent draws."""
    return posterior.mean + rng.standard_normal((n, posterior.d)) @ posterior.chol.T


def predictive_default_prob(posterior: GaussianPosterior, x, n_samples: int, rng) -> float:
    """Monte Carlo posterior-predictive probability of default."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    draws = sample_many(posterior, n_samples, rng)
    return float(np.mean(sigmoid(draws @ np.asarray(x, dtype=float))))


@dataclass(frozen=True, eq=False)
class PosteriorBank:
    """One posterior per context."""

    per_context: tuple

    def __post_init__(self):
        object.__setattr__(self, "per_context", tuple(self.per_context))
        if not self.per_context:
            raise DimensionError("bank needs at least one context")
        d = self.per_context[0].d
        if any(p.d != d for p in self.per_context):
            raise DimensionError("posteriors in a bank must share dimension")

    @classmethod
    def from_prior(cls, prior: GaussianPrior, m: int) -> "PosteriorBank":
        post = GaussianPosterior.from_prior(prior)
        return cls((post,) * m)

    def __len__(self):
        return len(self.per_context)

    def __getitem__(self, m: int) -> GaussianPosterior:
        return self.per_context[m]

    @property
    def d(self) -> int:
        return self.per_context[0].d

    def means(self) -> np.ndarray:
        return np.vstack([p.mean for p in self.per_context])

    def sample(self, rng) -> np.ndarray:
        """One (M, d) parameter matrix drawn from the product posterior."""
        return np.vstack([sample(p, rng) for p in self.per_context])

    def sample_many(self, n: int, rng) -> np.ndarray:
        """(n, M, d) joint draws, one independent draw of every context per slice."""
        return np.stack([sample_many(p, n, rng) for p in self.per_context], axis=1)

    def replace(self, m: int, posterior: GaussianPosterior) -> "PosteriorBank":
        items = list(self.per_context)
        items[m] = posterior
        return PosteriorBank(tuple(items))
