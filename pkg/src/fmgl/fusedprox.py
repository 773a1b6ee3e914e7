"""Exact solver for the 1-D fused lasso signal approximator.

The per-entry proximal subproblem of the joint estimation solvers is

    min_theta  0.5 * sum_k (theta_k - g_k)^2
               + alpha1 * sum_k |theta_k|
               + alpha2 * sum_{k<K} |theta_k - theta_{k+1}|

over a short sequence of K values.  It is solved exactly by total
variation denoising (direct single-pass taut-string method) followed by
soft thresholding.  A subgradient optimality residual is provided for
verification; it is computed exactly by bisection over a chain of
interval-feasibility checks.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ParameterError


@dataclass(frozen=True)
class ProxProblem:
    """Targets and penalty weights of one fused-lasso prox problem.

    g is the length-K target vector, alpha1 the elementwise l1 weight,
    alpha2 the weight on absolute differences of consecutive entries.
    """

    g: np.ndarray
    alpha1: float
    alpha2: float

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 1 or g.size < 1:
            raise ParameterError("prox targets must be a nonempty 1-D vector")
        if not np.all(np.isfinite(g)):
            raise ParameterError("prox targets must be finite")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ParameterError("prox penalty weights must be nonnegative")
        object.__setattr__(self, "g", g)

    @property
    def k(self):
        return self.g.size


@njit(cache=True)
def _tv1d(y, lam, x):
    """Exact TV denoising of one sequence, direct non-iterative method.

    Writes argmin_x 0.5*||x - y||^2 + lam * sum |x_k - x_{k+1}| into x.
    Single forward pass maintaining the current segment's value bounds
    (vmin, vmax) and slack accumulators (umin, umax); a violated bound
    fixes the segment and restarts after it.
    """
    n = y.shape[0]
    if n == 1 or lam <= 0.0:
        for i in range(n):
            x[i] = y[i]
        return
    k = 0
    k0 = 0
    km = 0
    kp = 0
    vmin = y[0] - lam
    vmax = y[0] + lam
    umin = lam
    umax = -lam
    while True:
        if k == n - 1:
            x[k] = vmin + umin
            return
        while True:
            if y[k + 1] + umin < vmin - lam:
                # lower tube bound breached: segment ends with a downward jump
                for i in range(k0, km + 1):
                    x[i] = vmin
                k = km + 1
                k0 = k
                km = k
                kp = k
                vmin = y[k]
                vmax = y[k] + 2.0 * lam
                umin = lam
                umax = -lam
            elif y[k + 1] + umax > vmax + lam:
                # upper tube bound breached: upward jump
                for i in range(k0, kp + 1):
                    x[i] = vmax
                k = kp + 1
                k0 = k
                km = k
                kp = k
                vmin = y[k] - 2.0 * lam
                vmax = y[k]
                umin = lam
                umax = -lam
            else:
                k += 1
                umin += y[k] - vmin
                umax += y[k] - vmax
                if umin >= lam:
                    vmin += (umin - lam) / (k - k0 + 1)
                    umin = lam
                    km = k
                if umax <= -lam:
                    vmax += (umax + lam) / (k - k0 + 1)
                    umax = -lam
                    kp = k
            if k == n - 1:
                break
        if umin < 0.0:
            for i in range(k0, km + 1):
                x[i] = vmin
            k = km + 1
            k0 = k
            km = k
            vmin = y[k]
            umin = lam
            umax = y[k] + lam - vmax
        elif umax > 0.0:
            for i in range(k0, kp + 1):
                x[i] = vmax
            k = kp + 1
            k0 = k
            kp = k
            vmax = y[k]
            umax = -lam
            umin = y[k] - lam - vmin
        else:
            v = vmin + umin / (k - k0 + 1)
            for i in range(k0, n):
                x[i] = v
            return


@njit(cache=True)
def _flsa_rows(targets, a1, a2, out):
    """Row-wise fused lasso prox: TV denoise each row, then soft-threshold."""
    m, k = targets.shape
    buf = np.empty(k)
    for r in range(m):
        _tv1d(targets[r], a2, buf)
        for j in range(k):
            v = buf[j]
            if v > a1:
                out[r, j] = v - a1
            elif v < -a1:
                out[r, j] = v + a1
            else:
                out[r, j] = 0.0
    return out


def soft_threshold(x, t):
    """Elementwise sign(x) * max(|x| - t, 0)."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def tv_prox(g, alpha2):
    """Exact prox of alpha2 * TV for one sequence.

    Returns argmin_x 0.5*||x - g||^2 + alpha2 * sum_{k<K} |x_k - x_{k+1}|.
    """
    g = np.ascontiguousarray(g, dtype=float)
    if alpha2 < 0:
        raise ParameterError("alpha2 must be nonnegative")
    out = np.empty_like(g)
    _tv1d(g, float(alpha2), out)
    return out


def flsa(problem):
    """Exact minimizer of one fused lasso signal approximation problem.

    Composition property: soft-thresholding the TV-prox output by alpha1
    yields the joint minimizer.
    """
    out = np.empty((1, problem.k))
    _flsa_rows(problem.g.reshape(1, -1), float(problem.alpha1),
               float(problem.alpha2), out)
    return out[0]


def flsa_batch(targets, alpha1, alpha2):
    """Solve m independent K-sequence fused lasso prox problems at once.

    targets has shape (m, K); returns the same shape.  This is the hot
    path of the solvers (one row per free matrix entry).
    """
    targets = np.ascontiguousarray(targets, dtype=float)
    if targets.ndim != 2:
        raise ParameterError("batch targets must be 2-D (m, K)")
    out = np.empty_like(targets)
    _flsa_rows(targets, float(alpha1), float(alpha2), out)
    return out


def _subgradient_boxes(theta):
    """Subgradient intervals for |.| terms at the rows of theta.

    Returns (glo, ghi, ulo, uhi): per-entry boxes for the elementwise
    terms and per-adjacent-pair boxes for the difference terms.  Exact
    zeros get the full interval [-1, 1]; nonzeros are pinned at the sign.
    """
    sgn = np.sign(theta)
    glo = np.where(sgn == 0.0, -1.0, sgn)
    ghi = np.where(sgn == 0.0, 1.0, sgn)
    d = theta[:, :-1] - theta[:, 1:]
    dsgn = np.sign(d)
    ulo = np.where(dsgn == 0.0, -1.0, dsgn)
    uhi = np.where(dsgn == 0.0, 1.0, dsgn)
    return glo, ghi, ulo, uhi


def _chain_feasible(rho, base, a1, a2, glo, ghi, ulo, uhi):
    """Existence check for subgradients keeping every chain equation
    within [-rho, rho], vectorized over rows.

    Forward interval propagation of the reachable set of each difference
    subgradient; the reachable set stays an interval, so the check is
    exact.
    """
    m, k = base.shape
    att_lo = base + a1 * glo
    att_hi = base + a1 * ghi
    rlo = np.zeros(m)
    rhi = np.zeros(m)
    ok = np.ones(m, dtype=bool)
    for j in range(k - 1):
        lo_new = rlo + (-rho - att_hi[:, j]) / a2
        hi_new = rhi + (rho - att_lo[:, j]) / a2
        rlo = np.maximum(lo_new, ulo[:, j])
        rhi = np.minimum(hi_new, uhi[:, j])
        bad = rlo > rhi
        ok &= ~bad
        rlo[bad] = np.inf
        rhi[bad] = -np.inf
    last_lo = att_lo[:, k - 1] - a2 * rhi
    last_hi = att_hi[:, k - 1] - a2 * rlo
    ok &= (last_lo <= rho) & (last_hi >= -rho)
    return ok


#: Absolute accuracy of the bisection used for subgradient residuals.
RESIDUAL_BISECTION_TOL = 1e-12


def chain_residual_batch(base, theta, a1, a2):
    """Minimum-norm subgradient residual of m chain optimality systems.

    For each row: min over gamma_k in the subdifferential of |theta_k|
    and u_k in the subdifferential of |theta_k - theta_{k+1}| of
    max_k |base_k + a1*gamma_k + a2*(u_k - u_{k-1})| (boundary u absent).
    Zero exactly when base lies in the subdifferential of the penalty at
    theta.  Exact to RESIDUAL_BISECTION_TOL via bisection on the level.
    """
    base = np.atleast_2d(np.asarray(base, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if base.shape != theta.shape:
        raise ParameterError("base and theta must have matching shapes")
    m, k = base.shape
    glo, ghi, ulo, uhi = _subgradient_boxes(theta)
    att_lo = base + a1 * glo
    att_hi = base + a1 * ghi
    if k == 1 or a2 == 0.0:
        # difference terms absent or inactive: entries decouple
        straddles = (att_lo <= 0.0) & (att_hi >= 0.0)
        per = np.where(straddles, 0.0,
                       np.minimum(np.abs(att_lo), np.abs(att_hi)))
        return per.max(axis=1)
    hi = np.abs(base).max(axis=1) + a1 + 2.0 * a2
    lo = np.zeros(m)
    res = hi.copy()
    done = _chain_feasible(lo, base, a1, a2, glo, ghi, ulo, uhi)
    res[done] = 0.0
    for _ in range(64):
        if np.all(hi - lo <= RESIDUAL_BISECTION_TOL):
            break
        mid = 0.5 * (lo + hi)
        feas = _chain_feasible(mid, base, a1, a2, glo, ghi, ulo, uhi)
        hi = np.where(feas, mid, hi)
        lo = np.where(feas, lo, mid)
    res = np.where(done, 0.0, hi)
    return res


def flsa_residual(problem, theta):
    """Subgradient optimality residual of theta for one prox problem.

    Zero (up to bisection accuracy) exactly at the minimizer.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != problem.g.shape:
        raise ParameterError("theta must match the problem dimension")
    base = (theta - problem.g).reshape(1, -1)
    return float(chain_residual_batch(base, theta.reshape(1, -1),
                                      float(problem.alpha1),
                                      float(problem.alpha2))[0])
