"""Exact block-diagonal screening.

A feature pair (i, j) can be screened out exactly when the vector of
sample covariances (S^(1)_ij, ..., S^(K)_ij) satisfies a family of
window-sum inequalities; the solution is then block diagonal over the
connected components of the surviving pairs, and each block can be
solved independently and reassembled without loss.
"""

from dataclasses import dataclass

import numpy as np

from .core import CovarianceSet, PrecisionSet, as_stack
from .errors import ParameterError


def window_conditions(x, lambda1, lambda2, strict=False):
    """Window-sum screening conditions, vectorized over rows of x.

    For each row (x_1, ..., x_K), checks for every window length
    t = 1..K-1: |prefix sum| <= t*lambda1 + lambda2, |suffix sum| <=
    t*lambda1 + lambda2, every interior window <= t*lambda1 + 2*lambda2,
    plus |full sum| <= K*lambda1.  strict=True uses < throughout (the
    shrinking test); the default non-strict form is the screening test.
    Window sums come from a per-row prefix-sum array.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, k = x.shape
    cs = np.zeros((m, k + 1))
    np.cumsum(x, axis=1, out=cs[:, 1:])

    def within(sums, bound):
        a = np.abs(sums)
        return a < bound if strict else a <= bound

    ok = within(cs[:, k] - cs[:, 0], k * lambda1)
    for t in range(1, k):
        bound_edge = t * lambda1 + lambda2
        bound_mid = t * lambda1 + 2.0 * lambda2
        ok &= within(cs[:, t] - cs[:, 0], bound_edge)
        ok &= within(cs[:, k] - cs[:, k - t], bound_edge)
        # interior windows of length t starting at r = 2..K-t (1-based)
        for r in range(2, k - t + 1):
            ok &= within(cs[:, r + t - 1] - cs[:, r - 1], bound_mid)
    return ok


def pair_is_screenable(s_vec, params):
    """True iff the pair with covariance entries s_vec can be zeroed out.

    Encodes the necessary-and-sufficient window inequalities; ties (sums
    exactly at a bound) count as screenable.
    """
    s_vec = np.asarray(s_vec, dtype=float)
    if s_vec.ndim != 1 or s_vec.size < 2:
        raise ParameterError("screening needs at least two graphs (K >= 2)")
    return bool(window_conditions(s_vec, params.lambda1, params.lambda2)[0])


def segment_dual_check(s_vec, params):
    """Test oracle for the screening conditions via segment vectors.

    Enumerates every vector d = +/-(0,..,0,1,..,1,0,..,0) (all K(K+1)
    contiguous segments with both signs) and checks

        s_vec . d - lambda1 * sum|d_i| - lambda2 * sum|d_i - d_{i+1}| <= 0

    for each.  Equivalent to pair_is_screenable by the extreme-ray
    characterization of the dual cone; coded independently against that
    definition.  Accepts K = 1, where it reduces to |s| <= lambda1.
    """
    s_vec = np.asarray(s_vec, dtype=float)
    k = s_vec.size
    for sign in (1.0, -1.0):
        for a in range(k):
            for b in range(a, k):
                d = np.zeros(k)
                d[a:b + 1] = sign
                tv = np.abs(np.diff(d)).sum()
                f = s_vec @ d - params.lambda1 * np.abs(d).sum() \
                    - params.lambda2 * tv
                if f > 0.0:
                    return False
    return True


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Symmetric boolean pair-survival matrix with a True diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=bool)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ParameterError("adjacency must be square")
        if not np.array_equal(e, e.T) or not np.all(np.diagonal(e)):
            raise ParameterError("adjacency must be symmetric with a true "
                                 "diagonal")
        object.__setattr__(self, "entries", e)

    @property
    def p(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class BlockPartition:
    """Disjoint feature index blocks covering {0..p-1}.

    Blocks are ordered by smallest member and internally sorted, so
    reports and golden files are deterministic.
    """

    blocks: tuple
    p: int

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(i) for i in b)) for b in self.blocks)
        seen = [i for b in blocks for i in b]
        if any(len(b) == 0 for b in blocks):
            raise ParameterError("blocks must be nonempty")
        if sorted(seen) != list(range(self.p)):
            raise ParameterError("blocks must partition 0..p-1")
        blocks = tuple(sorted(blocks, key=lambda b: b[0]))
        object.__setattr__(self, "blocks", blocks)

    def sizes(self):
        return [len(b) for b in self.blocks]


def build_adjacency(s, params):
    """Adjacency of the pairs that survive screening.

    E_ij is False exactly when (S^(1)_ij, ..., S^(K)_ij) satisfies the
    screening inequalities; the diagonal is True.
    """
    arr = as_stack(s)
    p = arr.shape[1]
    e = np.eye(p, dtype=bool)
    iu, ju = np.triu_indices(p, k=1)
    if iu.size:
        vecs = arr[:, iu, ju].T
        keep = ~window_conditions(vecs, params.lambda1, params.lambda2)
        e[iu[keep], ju[keep]] = True
        e[ju[keep], iu[keep]] = True
    return AdjacencyMatrix(e)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def connected_components(adj):
    """Connected components of the adjacency graph as a BlockPartition."""
    p = adj.p
    uf = _UnionFind(p)
    iu, ju = np.nonzero(np.triu(adj.entries, k=1))
    for i, j in zip(iu.tolist(), ju.tolist()):
        uf.union(i, j)
    groups = {}
    for i in range(p):
        groups.setdefault(uf.find(i), []).append(i)
    return BlockPartition(tuple(tuple(g) for g in groups.values()), p)


def extract_block(s, block):
    """Submatrices S^(k)[block, block] as a new CovarianceSet."""
    idx = sorted(int(i) for i in block)
    arr = as_stack(s)
    p = arr.shape[1]
    if not idx or idx[0] < 0 or idx[-1] >= p:
        raise ParameterError("block indices out of range for p=%d" % p)
    if len(set(idx)) != len(idx):
        raise ParameterError("block indices must be distinct")
    sub = arr[np.ix_(range(arr.shape[0]), idx, idx)].copy()
    n = s.n_samples if isinstance(s, CovarianceSet) else None
    validated = s.validated if isinstance(s, CovarianceSet) else False
    return CovarianceSet(sub, n_samples=n, validated=validated)


def assemble_solution(block_solutions, partition):
    """Scatter per-block solutions back into full block-diagonal matrices.

    Entries outside every block are zero; positive definiteness of the
    result follows from the blocks.
    """
    if len(block_solutions) != len(partition.blocks):
        raise ParameterError("got %d block solutions for %d blocks"
                             % (len(block_solutions), len(partition.blocks)))
    stacks = [as_stack(b) for b in block_solutions]
    k = stacks[0].shape[0]
    p = partition.p
    full = np.zeros((k, p, p))
    for sub, block in zip(stacks, partition.blocks):
        if sub.shape[0] != k:
            raise ParameterError("inconsistent graph count across blocks")
        if sub.shape[1] != len(block):
            raise ParameterError(
                "block solution of size %d does not match block of size %d"
                % (sub.shape[1], len(block)))
        full[np.ix_(range(k), block, block)] = sub
    return PrecisionSet(full)
