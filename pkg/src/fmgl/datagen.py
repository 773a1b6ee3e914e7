"""Synthetic instance generators and evaluation metrics.

Two ground-truth families: a block-diagonal model with controlled
per-block sparsity (the efficiency protocol) and a sequential drift
model that adds/deletes edges between consecutive graphs (the stability
protocol).  All randomness flows through numpy's seeded PCG64 generator
(np.random.default_rng), so instances are reproducible from a 64-bit
seed.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import (CovarianceSet, PenaltyParams, PrecisionSet, as_stack,
                   validate_covariances)
from .errors import ParameterError
from .newton import SolverConfig, solve_with_screening
from .screening import BlockPartition

#: Magnitude below which an estimated entry counts as a structural zero.
EDGE_ZERO_TOL = 1e-8


@dataclass(frozen=True)
class GroundTruth:
    """True precision matrices with their support and block structure."""

    theta_true: PrecisionSet
    edge_sets: tuple            # per graph: frozenset of (i, j), i < j
    partition: BlockPartition | None = None

    @property
    def p(self):
        return self.theta_true.p

    @property
    def k(self):
        return self.theta_true.k


def _block_sizes(p, n_blocks):
    """Near-even split; the first p mod L blocks get the extra feature."""
    base, extra = divmod(p, n_blocks)
    return [base + 1] * extra + [base] * (n_blocks - extra)


def gen_block_model(p, k, n_blocks, seed):
    """Block-diagonal ground truth with ~10*p/L nonzeros per block.

    Every graph gets an independent random sparsity pattern inside each
    block: edge pairs are sampled without replacement until the block's
    nonzero count (diagonal plus both symmetric positions) reaches the
    budget min(10*block_size, block_size^2).  Off-diagonal values are
    uniform on [-1, 1]; diagonals are set to the row absolute sum plus
    Uniform[0.1, 0.5], so every matrix is strictly diagonally dominant
    and positive definite.
    """
    if p < 1 or k < 1:
        raise ParameterError("p and k must be positive")
    if n_blocks < 1 or n_blocks > p:
        raise ParameterError("number of blocks must lie in 1..p")
    rng = np.random.default_rng(seed)
    sizes = _block_sizes(p, n_blocks)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    theta = np.zeros((k, p, p))
    edge_sets = []
    blocks = []
    for b in range(n_blocks):
        blocks.append(tuple(range(starts[b], starts[b + 1])))
    for g in range(k):
        edges = set()
        for b, m in enumerate(sizes):
            lo = starts[b]
            budget = min(10 * m, m * m)
            n_pairs = max(0, math.ceil((budget - m) / 2))
            pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
            order = rng.permutation(len(pairs))
            for t in range(n_pairs):
                i, j = pairs[order[t]]
                val = rng.uniform(-1.0, 1.0)
                theta[g, lo + i, lo + j] = val
                theta[g, lo + j, lo + i] = val
                edges.add((lo + i, lo + j))
            for i in range(m):
                row_sum = np.abs(theta[g, lo + i, lo:lo + m]).sum()
                theta[g, lo + i, lo + i] = row_sum + rng.uniform(0.1, 0.5)
        edge_sets.append(frozenset(edges))
    return GroundTruth(PrecisionSet(theta), tuple(edge_sets),
                       BlockPartition(tuple(blocks), p))


def _add_edge(theta, i, j, sigma):
    theta[i, i] += sigma
    theta[j, j] += sigma
    theta[i, j] -= sigma
    theta[j, i] -= sigma


def _delete_edge(theta, i, j):
    sigma = abs(theta[i, j])
    theta[i, i] -= sigma
    theta[j, j] -= sigma
    theta[i, j] = 0.0
    theta[j, i] = 0.0


def gen_drift_model(p, n_edges, n_flips, k, seed):
    """Sequentially drifting ground truth.

    The first matrix starts at 0.25*I; adding an edge (i, j) adds a
    weight sigma ~ Uniform[0.1, 0.3] to both diagonal entries and
    subtracts it from the two off-diagonal positions, which preserves
    diagonal dominance.  Each subsequent graph adds n_flips new edges
    and deletes n_flips existing ones (deletion reverses the addition at
    the edge's current magnitude).
    """
    if p < 2:
        raise ParameterError("p must be at least 2")
    max_edges = p * (p - 1) // 2
    if not 0 <= n_edges <= max_edges:
        raise ParameterError("n_edges must lie in 0..p(p-1)/2")
    if n_flips < 0 or n_flips > n_edges:
        raise ParameterError("n_flips must lie in 0..n_edges")
    if n_edges + n_flips > max_edges:
        raise ParameterError("not enough non-edges to add %d per step"
                             % n_flips)
    rng = np.random.default_rng(seed)
    all_pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    theta = np.zeros((k, p, p))
    theta[0] = 0.25 * np.eye(p)
    first = [all_pairs[t] for t in
             rng.choice(max_edges, size=n_edges, replace=False)]
    for (i, j) in first:
        _add_edge(theta[0], i, j, rng.uniform(0.1, 0.3))
    edges = set(first)
    edge_sets = [frozenset(edges)]
    for g in range(1, k):
        theta[g] = theta[g - 1].copy()
        non_edges = [pr for pr in all_pairs if pr not in edges]
        add_idx = rng.choice(len(non_edges), size=n_flips, replace=False)
        existing = sorted(edges)
        del_idx = rng.choice(len(existing), size=n_flips, replace=False)
        for t in add_idx:
            i, j = non_edges[t]
            _add_edge(theta[g], i, j, rng.uniform(0.1, 0.3))
            edges.add((i, j))
        for t in del_idx:
            i, j = existing[t]
            _delete_edge(theta[g], i, j)
            edges.discard((i, j))
        edge_sets.append(frozenset(edges))
    return GroundTruth(PrecisionSet(theta), tuple(edge_sets), None)


def sample_gaussian(theta_true, n, seed):
    """Sample covariances S^(k) = X^T X / n from the true Gaussians.

    Draws n zero-mean samples per graph with covariance equal to the
    inverse of the true precision matrix; no mean subtraction.
    """
    if n < 1:
        raise ParameterError("sample count must be positive")
    stack = as_stack(theta_true)
    k, p = stack.shape[0], stack.shape[1]
    rng = np.random.default_rng(seed)
    covs = np.empty_like(stack)
    for g in range(k):
        sigma = np.linalg.inv(stack[g])
        sigma = 0.5 * (sigma + sigma.T)
        chol = np.linalg.cholesky(sigma)
        x = rng.standard_normal((n, p)) @ chol.T
        covs[g] = x.T @ x / n
    return validate_covariances(CovarianceSet(covs, n_samples=n))


def support_sets(theta, zero_tol=EDGE_ZERO_TOL):
    """Off-diagonal support of each graph as sets of (i, j), i < j."""
    stack = as_stack(theta)
    p = stack.shape[1]
    iu, ju = np.triu_indices(p, k=1)
    out = []
    for g in range(stack.shape[0]):
        nz = np.abs(stack[g, iu, ju]) > zero_tol
        out.append(frozenset(zip(iu[nz].tolist(), ju[nz].tolist())))
    return out


def edge_accuracy(estimate, truth, zero_tol=EDGE_ZERO_TOL):
    """Fraction of true edges recovered, aggregated over graphs."""
    stack = as_stack(estimate)
    if stack.shape[0] != truth.k or stack.shape[1] != truth.p:
        raise ParameterError("estimate and truth shapes differ")
    n_g = sum(len(es) for es in truth.edge_sets)
    if n_g == 0:
        return 1.0
    n_d = 0
    for g, es in enumerate(truth.edge_sets):
        for (i, j) in es:
            if abs(stack[g, i, j]) > zero_tol:
                n_d += 1
    return n_d / n_g


def stable_edges(estimates, threshold, zero_tol=EDGE_ZERO_TOL):
    """Edges present in more than `threshold` fraction of replications.

    The comparison is strict: an edge at exactly the threshold fraction
    is not stable.  Returns per-graph sets of (i, j) pairs.
    """
    if not estimates:
        raise ParameterError("need at least one replication")
    if not 0 < threshold <= 1:
        raise ParameterError("threshold must lie in (0, 1]")
    stacks = [as_stack(e) for e in estimates]
    shape = stacks[0].shape
    if any(st.shape != shape for st in stacks):
        raise ParameterError("replications must share one shape")
    k, p = shape[0], shape[1]
    iu, ju = np.triu_indices(p, k=1)
    counts = np.zeros((k, iu.size))
    for st in stacks:
        counts += np.abs(st[:, iu, ju]) > zero_tol
    frac = counts / len(stacks)
    out = []
    for g in range(k):
        sel = frac[g] > threshold
        out.append(frozenset(zip(iu[sel].tolist(), ju[sel].tolist())))
    return out


def mean_edge_count(theta, zero_tol=EDGE_ZERO_TOL):
    """Average per-graph count of off-diagonal support pairs."""
    sets = support_sets(theta, zero_tol)
    return sum(len(s) for s in sets) / len(sets)


def tune_lambda1(s, lambda2, target_edges, independent=False, config=None,
                 lo=None, hi=None, max_steps=12, rel_band=0.1,
                 zero_tol=EDGE_ZERO_TOL):
    """Bisect lambda1 so the solution has about target_edges per graph.

    Artifact plumbing for the experiment protocols (the edge count of
    the estimate is monotone non-increasing in lambda1).  Solves with
    screening at each probe; returns (lambda1, achieved_count) for the
    probe closest to the target, stopping early inside the relative
    band.
    """
    if target_edges <= 0:
        raise ParameterError("target_edges must be positive")
    config = config or SolverConfig()
    sm = as_stack(s)
    p = sm.shape[1]
    off_max = float(np.abs(sm[:, ~np.eye(p, dtype=bool)]).max())
    lo = lo if lo is not None else max(1e-6, 1e-4 * off_max)
    hi = hi if hi is not None else off_max + lambda2 + 1e-6

    def count_at(lam1):
        params = (PenaltyParams.independent(lam1) if independent
                  else PenaltyParams(lam1, lambda2))
        sol, _ = solve_with_screening(s, params, config)
        return mean_edge_count(sol.matrices, zero_tol)

    best = None
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        cnt = count_at(mid)
        if best is None or abs(cnt - target_edges) < abs(best[1] - target_edges):
            best = (mid, cnt)
        if abs(cnt - target_edges) <= rel_band * target_edges:
            return mid, cnt
        if cnt > target_edges:
            lo = mid
        else:
            hi = mid
    return best
