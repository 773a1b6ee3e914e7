"""Inner solver for the penalized quadratic model of one Newton step.

The smooth part of the model at the reference point Theta_t is, per
graph, q_k(Theta) = 0.5*tr(W D W D) + tr((S - W) D) with
W = (Theta_t^(k))^-1 and D = Theta^(k) - Theta_t^(k); the implicit
Hessian acts as D -> W D W and is never materialized.  The model (plus
the nonsmooth penalty) is minimized over the free entries by a
non-monotone spectral projected gradient method with Barzilai-Borwein
step lengths and fused-lasso prox maps.  Iterates are not constrained
positive definite; the outer line search restores definiteness.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import PenaltyParams, as_stack, penalty
from .errors import ParameterError
from .fusedprox import flsa_batch


@dataclass(frozen=True)
class NspgConfig:
    """Inner-solver controls.

    tol is the relative-change stopping threshold
    max_k ||Theta_r - Theta_{r-1}||_inf / max_k ||Theta_{r-1}||_inf.
    """

    tol: float = 1e-6
    max_iters: int = 500
    history_len: int = 10
    step_min: float = 1e-12
    step_max: float = 1e12
    sufficient_decrease: float = 1e-4

    def __post_init__(self):
        if self.tol <= 0:
            raise ParameterError("inner tol must be positive")
        if self.history_len < 1:
            raise ParameterError("history_len must be >= 1")


class QuadraticModel:
    """Data of one Newton-step model: reference point, inverses, free set.

    free_mask is a symmetric boolean (p, p) matrix marking entries
    allowed to move (diagonal included when free); everything outside it
    stays at the reference value.
    """

    def __init__(self, theta_ref, w, s, params, free_mask):
        self.theta_ref = as_stack(theta_ref)
        self.w = as_stack(w)
        self.s = as_stack(s)
        if not isinstance(params, PenaltyParams):
            raise ParameterError("params must be a PenaltyParams")
        self.params = params
        k, p = self.theta_ref.shape[0], self.theta_ref.shape[1]
        if self.w.shape != self.theta_ref.shape or self.s.shape != self.theta_ref.shape:
            raise ParameterError("model matrix stacks must share one shape")
        eye = np.eye(p)
        for i in range(k):
            if np.abs(self.w[i] @ self.theta_ref[i] - eye).max() > 1e-8:
                raise ParameterError(
                    "w[%d] is not the inverse of theta_ref[%d]" % (i, i))
        mask = np.asarray(free_mask, dtype=bool)
        if mask.shape != (p, p) or not np.array_equal(mask, mask.T):
            raise ParameterError("free_mask must be symmetric (p, p)")
        self.free_mask = mask
        iu, ju = np.triu_indices(p, k=1)
        sel = mask[iu, ju]
        self.free_offdiag = (iu[sel], ju[sel])
        self.free_diag = np.nonzero(np.diagonal(mask))[0]

    @property
    def k(self):
        return self.theta_ref.shape[0]

    @property
    def p(self):
        return self.theta_ref.shape[1]

    @property
    def free_pair_count(self):
        return len(self.free_offdiag[0]) + len(self.free_diag)


@dataclass
class NspgResult:
    theta: np.ndarray
    iterations: int
    converged: bool
    objective: float


def smooth_gradient(model, theta):
    """Gradient of the smooth model part, masked to the free set.

    Per graph: W (Theta - Theta_ref) W + S - W; entries outside the free
    set are zeroed so fixed entries never move.
    """
    theta = as_stack(theta)
    grad = np.empty_like(theta)
    for k in range(model.k):
        d = theta[k] - model.theta_ref[k]
        grad[k] = model.w[k] @ d @ model.w[k] + model.s[k] - model.w[k]
        grad[k][~model.free_mask] = 0.0
    return grad


def smooth_model_value(model, theta):
    """Smooth model part sum_k 0.5*tr(W D W D) + tr((S - W) D).

    The constant f_k(Theta_ref) is omitted.
    """
    theta = as_stack(theta)
    val = 0.0
    for k in range(model.k):
        d = theta[k] - model.theta_ref[k]
        wd = model.w[k] @ d
        val += 0.5 * np.sum(wd * wd.T) + np.sum((model.s[k] - model.w[k]) * d)
    return float(val)


def model_objective(model, theta):
    """Penalized model value (smooth part plus penalty, constant omitted)."""
    return smooth_model_value(model, theta) + penalty(theta, model.params)


def prox_map(theta, grad, step, model):
    """One proximal step of the model at step length `step`.

    Free off-diagonal pairs take a fused-lasso prox of the forward step
    with weights step*(lambda1, lambda2), applied symmetrically; free
    diagonal entries take a plain gradient step (unpenalized); fixed
    entries are returned unchanged.
    """
    if step <= 0:
        raise ParameterError("step must be positive")
    theta = as_stack(theta)
    new = theta.copy()
    di = model.free_diag
    if di.size:
        new[:, di, di] = theta[:, di, di] - step * grad[:, di, di]
    iu, ju = model.free_offdiag
    if iu.size:
        targets = (theta[:, iu, ju] - step * grad[:, iu, ju]).T
        vals = flsa_batch(targets, step * model.params.lambda1,
                          step * model.params.lambda2).T
        new[:, iu, ju] = vals
        new[:, ju, iu] = vals
    return new


def nspg_solve(model, config=None):
    """Minimize the penalized model over the free entries.

    Spectral (BB1) step lengths clamped to the configured bounds, a
    nonmonotone acceptance test against the maximum objective over the
    last history_len iterates, and fused-lasso prox maps.  Returns the
    best-effort iterate with converged=False when the iteration budget
    runs out.
    """
    if config is None:
        config = NspgConfig()
    theta = model.theta_ref.copy()
    if model.free_pair_count == 0:
        return NspgResult(theta, 0, True, model_objective(model, theta))
    grad = smooth_gradient(model, theta)
    q_val = model_objective(model, theta)
    history = [q_val]
    step = 1.0
    prev_theta = None
    prev_grad = None
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        if prev_theta is not None:
            dv = theta - prev_theta
            dg = grad - prev_grad
            denom = np.sum(dv * dg)
            step = np.sum(dv * dv) / denom if denom > 0 else 1.0
        step = min(max(step, config.step_min), config.step_max)
        q_ref = max(history[-config.history_len:])
        cand = theta
        q_cand = q_val
        for _ in range(60):
            cand = prox_map(theta, grad, step, model)
            q_cand = model_objective(model, cand)
            decrease = 0.5 * config.sufficient_decrease \
                * np.sum((cand - theta) ** 2) / step
            if q_cand <= q_ref - decrease:
                break
            if step <= config.step_min:
                break
            step = max(0.5 * step, config.step_min)
        denom = max(np.abs(theta).reshape(model.k, -1).max(), 1e-30)
        rel_change = np.abs(cand - theta).reshape(model.k, -1).max() / denom
        prev_theta, prev_grad = theta, grad
        theta = cand
        q_val = q_cand
        history.append(q_val)
        grad = smooth_gradient(model, theta)
        if rel_change <= config.tol:
            converged = True
            break
    return NspgResult(theta, it, converged, q_val)
