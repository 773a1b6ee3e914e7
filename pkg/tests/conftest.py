"""Shared helpers: random SPD instances and the grid-search oracle."""

import numpy as np
import pytest

from fmgl.core import CovarianceSet, validate_covariances


def random_spd(rng, p, scale=1.0):
    """Random symmetric positive definite matrix via diagonal dominance."""
    a = rng.uniform(-scale, scale, size=(p, p))
    a = 0.5 * (a + a.T)
    np.fill_diagonal(a, np.abs(a).sum(axis=1) + rng.uniform(0.1, 0.5, p))
    return a


def random_covariances(rng, p, k, n=None):
    """Random validated covariance set (sampled empirical if n given)."""
    mats = []
    for _ in range(k):
        sigma = random_spd(rng, p)
        if n is not None:
            chol = np.linalg.cholesky(sigma)
            x = rng.standard_normal((n, p)) @ chol.T
            mats.append(x.T @ x / n)
        else:
            mats.append(sigma)
    return validate_covariances(CovarianceSet(np.stack(mats), n_samples=n))


def flsa_objective(theta, g, a1, a2):
    """Objective of the fused-lasso prox problem, rowwise for 2-D input."""
    theta = np.atleast_2d(theta)
    g = np.asarray(g, dtype=float)
    v = 0.5 * np.sum((theta - g) ** 2, axis=1) + a1 * np.sum(np.abs(theta),
                                                             axis=1)
    if theta.shape[1] > 1:
        v += a2 * np.sum(np.abs(np.diff(theta, axis=1)), axis=1)
    return v if v.size > 1 else float(v[0])


def grid_minimum(g, a1, a2, n_total=200_000, lo=-6.0, hi=6.0):
    """Grid-search oracle: minimum objective over a product grid.

    The grid resolution adapts to the dimension so the total point count
    stays near n_total; the returned value upper-bounds the true minimum
    (used for one-sided exactness checks).
    """
    k = len(g)
    npts = max(5, int(round(n_total ** (1.0 / k))))
    ax = np.linspace(lo, hi, npts)
    mesh = np.meshgrid(*([ax] * k), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return float(np.min(flsa_objective(pts, g, a1, a2)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
