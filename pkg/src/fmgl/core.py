"""Domain types, objective evaluation, and optimality diagnostics.

The estimation problem over K precision matrices Theta^(k) is

    min  sum_k [ -log det Theta^(k) + tr(S^(k) Theta^(k)) ]
         + lambda1 * sum_k sum_{i!=j} |Theta^(k)_ij|
         + lambda2 * sum_{k<K} sum_{i!=j} |Theta^(k)_ij - Theta^(k+1)_ij|

subject to every Theta^(k) being positive definite.  Diagonals are
unpenalized.  All p x p matrices are stored dense; decomposition keeps
the blocks that actually get factorized small.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DataError, NumericalError, ParameterError
from .fusedprox import chain_residual_batch

#: Default diagonal perturbation ensuring diag(S) > 0.
DIAG_PERTURBATION = 1e-8

#: Accuracy of the off-diagonal KKT residual (bisection level search).
KKT_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class PenaltyParams:
    """Regularization weights: lambda1 (l1), lambda2 (sequential fused).

    Both must be strictly positive; the theory behind screening and
    shrinking assumes it.  The independent-estimation baseline (no
    fusion, lambda2 = 0) is only available through the explicit
    :meth:`independent` constructor.
    """

    lambda1: float
    lambda2: float
    is_independent: bool = False

    def __post_init__(self):
        if not np.isfinite(self.lambda1) or self.lambda1 <= 0:
            raise ParameterError("lambda1 must be strictly positive")
        if self.is_independent:
            if self.lambda2 != 0.0:
                raise ParameterError(
                    "independent mode fixes lambda2 = 0; got %r" % self.lambda2)
        elif not np.isfinite(self.lambda2) or self.lambda2 <= 0:
            raise ParameterError(
                "lambda2 must be strictly positive; use "
                "PenaltyParams.independent(lambda1) for the fused-free "
                "baseline")

    @classmethod
    def independent(cls, lambda1):
        """Fused-free baseline: per-graph l1 estimation (lambda2 = 0)."""
        return cls(lambda1, 0.0, is_independent=True)


def _check_stack(matrices, what):
    arr = np.asarray(matrices, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ParameterError(
            "%s must be a (K, p, p) stack of square matrices with equal "
            "dimensions; got shape %r" % (what, arr.shape))
    return arr


@dataclass(frozen=True)
class CovarianceSet:
    """The K sample covariance matrices of one joint estimation problem.

    matrices has shape (K, p, p) with K >= 2.  n_samples is optional
    metadata (samples per group).  Construction checks shapes only; use
    :func:`validate_covariances` to enforce symmetry and diag > 0.
    """

    matrices: np.ndarray
    n_samples: int | None = None
    validated: bool = field(default=False, compare=False)

    def __post_init__(self):
        arr = _check_stack(self.matrices, "covariances")
        if arr.shape[0] < 2:
            raise ParameterError("at least two graphs required (K >= 2)")
        object.__setattr__(self, "matrices", arr)

    @property
    def p(self):
        return self.matrices.shape[1]

    @property
    def k(self):
        return self.matrices.shape[0]


@dataclass(frozen=True)
class PrecisionSet:
    """K symmetric positive definite precision matrices, shape (K, p, p).

    Positive definiteness is verified by Cholesky at construction.
    """

    matrices: np.ndarray

    def __post_init__(self):
        arr = _check_stack(self.matrices, "precision matrices")
        for k in range(arr.shape[0]):
            if not np.allclose(arr[k], arr[k].T, rtol=0.0, atol=1e-8):
                raise ParameterError("precision matrix %d is not symmetric" % k)
            try:
                np.linalg.cholesky(arr[k])
            except np.linalg.LinAlgError:
                raise NumericalError(
                    "precision matrix %d is not positive definite" % k)
        object.__setattr__(self, "matrices", arr)

    @property
    def p(self):
        return self.matrices.shape[1]

    @property
    def k(self):
        return self.matrices.shape[0]


@dataclass
class SolveReport:
    """Run record of one solve.

    objective_trace is non-increasing for the descent (Newton) solver;
    the ADMM baseline records its raw per-iteration objective, which may
    oscillate before convergence.  free_set_sizes counts free index
    pairs (i <= j) per Newton iteration.  block_count is 1 when
    screening was not used.
    """

    outer_iterations: int
    objective_trace: list
    kkt_residual: float
    wall_time: float
    free_set_sizes: list = field(default_factory=list)
    block_count: int = 1
    beta_values: list = field(default_factory=list)
    block_sizes: list = field(default_factory=list)
    block_times: list = field(default_factory=list)
    converged: bool = True
    inner_exhausted: int = 0
    solver: str = "fmgl"
    primal_residual: float | None = None
    dual_residual: float | None = None

    def to_dict(self):
        return {
            "solver": self.solver,
            "outer_iterations": self.outer_iterations,
            "objective_trace": [float(v) for v in self.objective_trace],
            "kkt_residual": float(self.kkt_residual),
            "kkt_residual_tol": KKT_RESIDUAL_TOL,
            "wall_time": float(self.wall_time),
            "free_set_sizes": [int(v) for v in self.free_set_sizes],
            "block_count": int(self.block_count),
            "beta_values": [float(v) for v in self.beta_values],
            "block_sizes": [int(v) for v in self.block_sizes],
            "block_times": [float(v) for v in self.block_times],
            "converged": bool(self.converged),
            "inner_exhausted": int(self.inner_exhausted),
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
        }


def as_stack(theta):
    """Coerce a PrecisionSet, CovarianceSet, or array stack to (K, p, p)."""
    if isinstance(theta, (PrecisionSet, CovarianceSet)):
        return theta.matrices
    return _check_stack(theta, "matrix stack")


def validate_covariances(raw, perturbation=DIAG_PERTURBATION):
    """Symmetrize and repair the diagonals of raw covariance matrices.

    Each matrix is replaced by (S + S^T)/2; any diagonal entry <= 0 gets
    the perturbation added repeatedly until it is strictly positive (one
    addition suffices for entries that are >= 0).  Non-finite input is a
    data error.
    """
    if perturbation <= 0:
        raise ParameterError("perturbation must be positive")
    n_samples = raw.n_samples if isinstance(raw, CovarianceSet) else None
    arr = as_stack(raw)
    if arr.shape[0] < 2:
        raise ParameterError("at least two graphs required (K >= 2)")
    if not np.all(np.isfinite(arr)):
        raise DataError("covariance matrices contain non-finite entries")
    sym = 0.5 * (arr + arr.transpose(0, 2, 1))
    for k in range(sym.shape[0]):
        d = np.diagonal(sym[k]).copy()
        while np.any(d <= 0.0):
            d[d <= 0.0] += perturbation
        sym[k][np.diag_indices_from(sym[k])] = d
    sym.setflags(write=False)
    return CovarianceSet(sym, n_samples=n_samples, validated=True)


def neg_log_likelihood(theta, s):
    """-log det(theta) + tr(s @ theta) for one positive definite matrix.

    The log determinant comes from the Cholesky factor.
    """
    theta = np.asarray(theta, dtype=float)
    s = np.asarray(s, dtype=float)
    try:
        chol = np.linalg.cholesky(theta)
    except np.linalg.LinAlgError:
        raise NumericalError("matrix is not positive definite")
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol)))
    return float(-logdet + np.sum(s * theta))


def penalty(theta, params):
    """l1 + sequential fused penalty, diagonals excluded from both terms."""
    arr = as_stack(theta)
    k, p = arr.shape[0], arr.shape[1]
    off = ~np.eye(p, dtype=bool)
    val = params.lambda1 * np.abs(arr[:, off]).sum()
    if k > 1 and params.lambda2 > 0:
        diffs = arr[:-1] - arr[1:]
        val += params.lambda2 * np.abs(diffs[:, off]).sum()
    return float(val)


def objective(theta, s, params):
    """Full objective: summed negative log likelihoods plus the penalty."""
    t = as_stack(theta)
    sm = as_stack(s)
    if t.shape != sm.shape:
        raise ParameterError("theta and covariance shapes differ: %r vs %r"
                             % (t.shape, sm.shape))
    val = sum(neg_log_likelihood(t[k], sm[k]) for k in range(t.shape[0]))
    return val + penalty(t, params)


def inverse_stack(theta):
    """Inverses of a stack of SPD matrices via Cholesky, symmetrized."""
    arr = as_stack(theta)
    out = np.empty_like(arr)
    eye = np.eye(arr.shape[1])
    for k in range(arr.shape[0]):
        try:
            c, low = scipy.linalg.cho_factor(arr[k], lower=True)
        except scipy.linalg.LinAlgError:
            raise NumericalError("matrix %d is not positive definite" % k)
        w = scipy.linalg.cho_solve((c, low), eye)
        out[k] = 0.5 * (w + w.T)
    return out


def kkt_residual(theta, s, params):
    """Distance of 0 from the objective's subdifferential at theta.

    Diagonal entries contribute |S_ii - (Theta^-1)_ii|; each off-diagonal
    pair contributes the minimum over valid subgradient selections of the
    max over k of the stationarity defects.  The per-pair minimization is
    solved exactly (to KKT_RESIDUAL_TOL) by bisection with interval
    propagation over the chain of fused subgradients.
    """
    t = as_stack(theta)
    sm = as_stack(s)
    if t.shape != sm.shape:
        raise ParameterError("theta and covariance shapes differ")
    w = inverse_stack(t)
    grad = sm - w
    p = t.shape[1]
    diag_res = np.abs(np.diagonal(grad, axis1=1, axis2=2)).max()
    iu, ju = np.triu_indices(p, k=1)
    if iu.size == 0:
        return float(diag_res)
    base = grad[:, iu, ju].T.copy()       # (m, K)
    tvals = t[:, iu, ju].T.copy()
    off_res = chain_residual_batch(base, tvals,
                                   params.lambda1, params.lambda2)
    return float(max(diag_res, off_res.max()))
