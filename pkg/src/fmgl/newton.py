"""Outer proximal Newton driver with shrinking and screening.

Each iteration partitions the entries into free and fixed sets from the
gradient (shrinking), minimizes the penalized quadratic model over the
free set to get a search direction, and backtracks along it under an
Armijo rule with Cholesky positive-definiteness checks.  The screening
entry point decomposes the problem over connected components first and
solves the blocks independently.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import (CovarianceSet, PrecisionSet, SolveReport, as_stack,
                   kkt_residual, penalty, validate_covariances)
from .errors import NumericalError, ParameterError
from .screening import (assemble_solution, build_adjacency,
                        connected_components, extract_block,
                        window_conditions)
from .subproblem import NspgConfig, QuadraticModel, nspg_solve

#: Smallest admissible backtracking step, 2^-30.
BETA_FLOOR = 2.0 ** -30


@dataclass(frozen=True)
class SolverConfig:
    """Outer-loop controls.

    outer_tol is the relative objective-change stopping threshold;
    armijo_sigma the sufficient-decrease constant in (0, 1); the step
    candidates are {1, 1/2, 1/4, ...} down to 2^-30.
    """

    outer_tol: float = 1e-5
    max_newton_iters: int = 100
    armijo_sigma: float = 1e-3
    inner: NspgConfig = field(default_factory=NspgConfig)
    use_screening: bool = True

    def __post_init__(self):
        if not 0 < self.armijo_sigma < 1:
            raise ParameterError("armijo_sigma must lie in (0, 1)")
        if self.outer_tol <= 0:
            raise ParameterError("outer_tol must be positive")


class NewtonState:
    """Current iterate with its factorizations kept consistent.

    Holds Theta, the Cholesky factors, the inverses W, the objective
    value, and the smooth gradient S - W; all refreshed together.
    """

    def __init__(self, theta, chols, w, objective_value, gradient, iteration):
        self.theta = theta
        self.chols = chols
        self.w = w
        self.objective = objective_value
        self.gradient = gradient
        self.iteration = iteration

    @classmethod
    def create(cls, theta, s, params, iteration=0):
        theta = as_stack(theta)
        s = as_stack(s)
        chols, w, smooth = _factorize(theta, s)
        return cls(theta, chols, w, smooth + penalty(theta, params),
                   s - w, iteration)


def _factorize(theta, s):
    """Cholesky-factor a stack; returns (factors, inverses, smooth value)."""
    k, p = theta.shape[0], theta.shape[1]
    chols = np.empty_like(theta)
    w = np.empty_like(theta)
    eye = np.eye(p)
    smooth = 0.0
    for i in range(k):
        try:
            chols[i] = np.linalg.cholesky(theta[i])
        except np.linalg.LinAlgError:
            raise NumericalError("iterate %d is not positive definite" % i)
        logdet = 2.0 * np.sum(np.log(np.diagonal(chols[i])))
        smooth += -logdet + np.sum(s[i] * theta[i])
        inv = scipy.linalg.cho_solve((chols[i], True), eye)
        w[i] = 0.5 * (inv + inv.T)
    if not np.isfinite(smooth):
        raise NumericalError("objective is not finite")
    return chols, w, float(smooth)


@dataclass(frozen=True)
class FreeFixedPartition:
    """Symmetric boolean matrix, True where an entry is free to move."""

    free: np.ndarray

    @property
    def fixed(self):
        return ~self.free

    @property
    def free_pair_count(self):
        p = self.free.shape[0]
        iu, ju = np.triu_indices(p)
        return int(self.free[iu, ju].sum())


def compute_fixed_set(state, params):
    """Shrinking: partition index pairs into free and fixed sets.

    A pair (i, j), i < j, is fixed when Theta_ij = 0 in every graph and
    the gradient vector satisfies the strict form of the screening
    window inequalities; zero steps on such entries are provably
    optimal.  Diagonals are always free.
    """
    theta = state.theta
    p = theta.shape[1]
    free = np.ones((p, p), dtype=bool)
    iu, ju = np.triu_indices(p, k=1)
    if iu.size == 0:
        return FreeFixedPartition(free)
    all_zero = (theta[:, iu, ju] == 0.0).all(axis=0)
    grads = state.gradient[:, iu, ju].T
    strict_ok = window_conditions(grads, params.lambda1, params.lambda2,
                                  strict=True)
    fixed = all_zero & strict_ok
    free[iu[fixed], ju[fixed]] = False
    free[ju[fixed], iu[fixed]] = False
    return FreeFixedPartition(free)


def newton_direction(state, free, s, params, inner=None):
    """Search direction from the model minimizer over the free set.

    Returns (D, NspgResult); D is zero on fixed entries.
    """
    model = QuadraticModel(state.theta, state.w, as_stack(s), params,
                           free.free)
    result = nspg_solve(model, inner or NspgConfig())
    return result.theta - state.theta, result


def line_search_decrement(state, d, s, params, inner_tol=1e-6):
    """Directional decrement delta used by the Armijo rule.

    delta = sum_k tr((S - W) D) + P(Theta + D) - P(Theta).  Negative for
    any nonzero direction produced by a correct model solve; a
    non-negative value with a non-trivial direction signals a broken
    subproblem.
    """
    sm = as_stack(s)
    d = as_stack(d)
    delta = float(np.sum((sm - state.w) * d)
                  + penalty(state.theta + d, params)
                  - penalty(state.theta, params))
    if delta >= 0.0 and np.abs(d).max() > 10.0 * inner_tol:
        raise NumericalError(
            "non-descent Newton direction (delta=%g); inner solve is "
            "inconsistent" % delta)
    return delta


def line_search(state, d, s, params, config=None, delta=None):
    """Armijo backtracking with Cholesky positive-definiteness checks.

    Accepts the largest beta in {1, 1/2, ...} >= 2^-30 whose trial point
    is positive definite in every graph and satisfies
    F(Theta + beta*D) <= F(Theta) + sigma*beta*delta.  Returns (beta,
    refreshed state); the accepted factors provide the new log
    determinants and inverses.
    """
    if config is None:
        config = SolverConfig()
    sm = as_stack(s)
    d = as_stack(d)
    if delta is None:
        delta = float(np.sum((sm - state.w) * d)
                      + penalty(state.theta + d, params)
                      - penalty(state.theta, params))
    beta = 1.0
    while beta >= BETA_FLOOR:
        cand = state.theta + beta * d
        try:
            chols, w, smooth = _factorize(cand, sm)
        except NumericalError:
            beta *= 0.5
            continue
        f_cand = smooth + penalty(cand, params)
        if f_cand <= state.objective + config.armijo_sigma * beta * delta:
            new = NewtonState(cand, chols, w, f_cand, sm - w,
                              state.iteration + 1)
            return beta, new
        beta *= 0.5
    raise NumericalError("line search failed to find an acceptable step; "
                         "numerical breakdown")


def solve_fmgl(s, params, config=None, on_iteration=None):
    """Proximal Newton solve of the joint estimation problem.

    Initializes at the inverted covariance diagonals and iterates
    shrinking / direction / line search until the relative objective
    change falls below outer_tol.  on_iteration, when given, is called
    with a dict per accepted iteration (used by diagnostics and tests).
    """
    if config is None:
        config = SolverConfig()
    if not isinstance(s, CovarianceSet) or not s.validated:
        s = validate_covariances(s if isinstance(s, CovarianceSet)
                                 else CovarianceSet(as_stack(s)))
    sm = s.matrices
    k, p = sm.shape[0], sm.shape[1]
    start = time.perf_counter()
    theta0 = np.zeros_like(sm)
    idx = np.arange(p)
    theta0[:, idx, idx] = 1.0 / sm[:, idx, idx]
    state = NewtonState.create(theta0, sm, params)
    trace = [state.objective]
    free_sizes = []
    betas = []
    inner_exhausted = 0
    converged = False
    for t in range(config.max_newton_iters):
        part = compute_fixed_set(state, params)
        free_sizes.append(part.free_pair_count)
        d, inner_result = newton_direction(state, part, sm, params,
                                           config.inner)
        if not inner_result.converged:
            inner_exhausted += 1
        d_norm = np.abs(d).max()
        if d_norm <= 1e-12 * max(1.0, np.abs(state.theta).max()):
            converged = True
            break
        delta = float(np.sum((sm - state.w) * d)
                      + penalty(state.theta + d, params)
                      - penalty(state.theta, params))
        if delta >= 0.0:
            if d_norm > 10.0 * config.inner.tol:
                raise NumericalError(
                    "non-descent Newton direction (delta=%g)" % delta)
            converged = True
            break
        prev = state
        beta, state = line_search(prev, d, sm, params, config, delta=delta)
        betas.append(beta)
        trace.append(state.objective)
        if on_iteration is not None:
            on_iteration({
                "iteration": t,
                "free": part.free,
                "theta_before": prev.theta,
                "direction": d,
                "beta": beta,
                "delta": delta,
                "theta_after": state.theta,
            })
        rel = abs(prev.objective - state.objective) \
            / max(1.0, abs(prev.objective))
        if rel <= config.outer_tol:
            converged = True
            break
    wall = time.perf_counter() - start
    report = SolveReport(
        outer_iterations=len(betas),
        objective_trace=trace,
        kkt_residual=kkt_residual(state.theta, sm, params),
        wall_time=wall,
        free_set_sizes=free_sizes,
        block_count=1,
        beta_values=betas,
        converged=converged,
        inner_exhausted=inner_exhausted,
    )
    return PrecisionSet(state.theta), report


def _solve_block(sub, params, config, on_iteration):
    """Solve one screening block; 1x1 blocks have the closed form
    theta_ii = 1/S_ii (the diagonal is unpenalized)."""
    if sub.p == 1:
        vals = sub.matrices[:, 0, 0]
        theta = (1.0 / vals).reshape(-1, 1, 1)
        return PrecisionSet(theta), None
    return solve_fmgl(sub, params, config, on_iteration=on_iteration)


def solve_with_screening(s, params, config=None, on_iteration=None,
                         threads=1):
    """Screen, solve the blocks independently, and reassemble.

    The adjacency of non-screenable pairs determines connected
    components; each becomes an independent subproblem whose solutions
    scatter back into block-diagonal precision matrices.  threads > 1
    solves blocks in a thread pool (results are order-independent).
    """
    if config is None:
        config = SolverConfig()
    if not isinstance(s, CovarianceSet) or not s.validated:
        s = validate_covariances(s if isinstance(s, CovarianceSet)
                                 else CovarianceSet(as_stack(s)))
    start = time.perf_counter()
    partition = connected_components(build_adjacency(s, params))
    subs = [extract_block(s, block) for block in partition.blocks]

    def run(sub):
        t0 = time.perf_counter()
        sol, rep = _solve_block(sub, params, config, on_iteration)
        return sol, rep, time.perf_counter() - t0

    if threads > 1 and len(subs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, subs))
    else:
        results = [run(sub) for sub in subs]
    solution = assemble_solution([r[0] for r in results], partition)
    block_times = [r[2] for r in results]
    reports = [r[1] for r in results if r[1] is not None]
    wall = time.perf_counter() - start
    final_objective = sum(r.objective_trace[-1] for r in reports)
    # 1x1 blocks contribute log(S_ii) + 1 each
    for sub in subs:
        if sub.p == 1:
            final_objective += float(
                np.log(sub.matrices[:, 0, 0]).sum() + sub.k)
    report = SolveReport(
        outer_iterations=max((r.outer_iterations for r in reports),
                             default=0),
        objective_trace=[final_objective],
        kkt_residual=kkt_residual(solution.matrices, s.matrices, params),
        wall_time=wall,
        free_set_sizes=[],
        block_count=len(partition.blocks),
        beta_values=[],
        block_sizes=partition.sizes(),
        block_times=block_times,
        converged=all(r.converged for r in reports),
        inner_exhausted=sum(r.inner_exhausted for r in reports),
    )
    return solution, report
