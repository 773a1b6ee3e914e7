"""ADMM baseline for the same objective, used for cross-validation.

Splits Theta = Z.  The Theta-update per graph has a closed form through
a symmetric eigendecomposition; the Z-update is an entrywise fused-lasso
prox; the scaled dual ascends on the gap.  Not a descent method: the
recorded objective trace is the raw per-iteration value of F(Z) and may
oscillate on its way down.
"""

import time
from dataclasses import dataclass

import numpy as np

from .core import (CovarianceSet, PrecisionSet, SolveReport, as_stack,
                   kkt_residual, neg_log_likelihood, penalty,
                   validate_covariances)
from .errors import NumericalError, ParameterError
from .fusedprox import flsa_batch


@dataclass(frozen=True)
class AdmmConfig:
    """rho is the (fixed) augmented-Lagrangian weight; target_objective,
    when set, stops the iteration once F(Z) reaches it."""

    rho: float = 1.0
    max_iters: int = 2000
    target_objective: float | None = None
    primal_tol: float = 1e-6
    dual_tol: float = 1e-6

    def __post_init__(self):
        if self.rho <= 0:
            raise ParameterError("rho must be positive")


def logdet_prox_eigenvalues(eigvals, rho):
    """Eigenvalue map of the Theta-update: (d + sqrt(d^2 + 4 rho))/(2 rho).

    Strictly positive for any real input, so the update is always
    positive definite.
    """
    eigvals = np.asarray(eigvals, dtype=float)
    return (eigvals + np.sqrt(eigvals ** 2 + 4.0 * rho)) / (2.0 * rho)


def _theta_update(s, z, u, rho):
    a = rho * (z - u) - s
    a = 0.5 * (a + a.T)
    try:
        vals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError:
        raise NumericalError("eigendecomposition failed in ADMM update")
    new = (vecs * logdet_prox_eigenvalues(vals, rho)) @ vecs.T
    return 0.5 * (new + new.T)


def _objective_or_inf(z, sm, params):
    try:
        val = sum(neg_log_likelihood(z[k], sm[k]) for k in range(z.shape[0]))
    except NumericalError:
        return np.inf
    return val + penalty(z, params)


def admm_solve(s, params, config=None):
    """Run ADMM to the residual tolerances or the target objective.

    Returns the (symmetrized) Z iterate as the sparse estimate together
    with a report; raises if the final Z is not positive definite.
    """
    if config is None:
        config = AdmmConfig()
    if not isinstance(s, CovarianceSet) or not s.validated:
        s = validate_covariances(s if isinstance(s, CovarianceSet)
                                 else CovarianceSet(as_stack(s)))
    sm = s.matrices
    k, p = sm.shape[0], sm.shape[1]
    start = time.perf_counter()
    idx = np.arange(p)
    z = np.zeros_like(sm)
    z[:, idx, idx] = 1.0 / sm[:, idx, idx]
    u = np.zeros_like(sm)
    theta = z.copy()
    iu, ju = np.triu_indices(p, k=1)
    scale = np.sqrt(k * p * p)
    trace = []
    converged = False
    it = 0
    primal = dual = np.inf
    for it in range(1, config.max_iters + 1):
        for g in range(k):
            theta[g] = _theta_update(sm[g], z[g], u[g], config.rho)
        v = theta + u
        z_old = z
        z = np.empty_like(v)
        z[:, idx, idx] = v[:, idx, idx]
        if iu.size:
            vals = flsa_batch(v[:, iu, ju].T,
                              params.lambda1 / config.rho,
                              params.lambda2 / config.rho).T
            z[:, iu, ju] = vals
            z[:, ju, iu] = vals
        u = u + theta - z
        obj = _objective_or_inf(z, sm, params)
        trace.append(obj)
        primal = np.linalg.norm((theta - z).ravel()) / scale
        dual = config.rho * np.linalg.norm((z - z_old).ravel()) / scale
        if config.target_objective is not None \
                and obj <= config.target_objective:
            converged = True
            break
        if primal <= config.primal_tol and dual <= config.dual_tol:
            converged = True
            break
    z = 0.5 * (z + z.transpose(0, 2, 1))
    try:
        solution = PrecisionSet(z)
    except NumericalError:
        raise NumericalError("ADMM estimate is not positive definite; "
                             "increase max_iters or adjust rho")
    wall = time.perf_counter() - start
    report = SolveReport(
        outer_iterations=it,
        objective_trace=trace,
        kkt_residual=kkt_residual(z, sm, params),
        wall_time=wall,
        converged=converged,
        solver="admm",
        primal_residual=float(primal),
        dual_residual=float(dual),
    )
    return solution, report
