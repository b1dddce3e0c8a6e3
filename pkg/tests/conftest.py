import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss

from underwrite.bayes import GaussianPosterior

ACCEPTANCE_LINES = []


def gauss_expect(f, mean, var, n=64):
    """E[f(t)] for t ~ N(mean, var) by probabilists' Gauss-Hermite quadrature."""
    nodes, weights = hermegauss(n)
    return float(np.sum(weights * f(mean + np.sqrt(var) * nodes)) / np.sqrt(2 * np.pi))


def degenerate(mean):
    mean = np.asarray(mean, dtype=float)
    return GaussianPosterior.from_moments(mean, 1e-20 * np.eye(len(mean)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def synthetic_2d(n=20, seed=7):
    r = np.random.default_rng(seed)
    X = r.standard_normal((n, 2))
    p = 1 / (1 + np.exp(-(X @ np.array([0.8, -0.5]))))
    y = (r.random(n) < p).astype(float)
    return X, y


def exact_log_posterior(theta, X, y):
    """log posterior under a N(0, I) prior, written out independently of the package."""
    m = X @ theta
    return float(np.sum(y * m - np.log1p(np.exp(m))) - 0.5 * theta @ theta)


def grid_argmax(X, y, lo=-3.0, hi=3.0, step=1e-3, chunk=100):
    """Brute-force maximizer of the 2-D log posterior over a square grid."""
    axis = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    best, arg = -np.inf, None
    t2 = axis[None, :]
    for start in range(0, len(axis), chunk):
        t1 = axis[start:start + chunk, None]
        val = -0.5 * (t1 ** 2 + t2 ** 2)
        for xi, yi in zip(X, y):
            m = t1 * xi[0] + t2 * xi[1]
            val = val + yi * m - np.logaddexp(0.0, m)
        k = np.unravel_index(np.argmax(val), val.shape)
        if val[k] > best:
            best, arg = val[k], np.array([axis[start + k[0]], axis[k[1]]])
    return arg


def fd_hessian(f, x, h=1e-5):
    """Central-difference Hessian."""
    d = len(x)
    H = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            ei = np.zeros(d)
            ej = np.zeros(d)
            ei[i] = h
            ej[j] = h
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
    return H
