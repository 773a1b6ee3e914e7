"""Screening conditions, adjacency, components, decompose/reassemble."""

import numpy as np
import pytest

from fmgl.core import CovarianceSet, PenaltyParams, objective, validate_covariances
from fmgl.datagen import gen_block_model, sample_gaussian
from fmgl.errors import ParameterError
from fmgl.newton import SolverConfig, solve_fmgl, solve_with_screening
from fmgl.screening import (AdjacencyMatrix, BlockPartition,
                            assemble_solution, build_adjacency,
                            connected_components, extract_block,
                            pair_is_screenable, segment_dual_check)
from fmgl.subproblem import NspgConfig

from conftest import random_covariances


def naive_bfs_components(adj):
    """Independent repeated-BFS reference for component extraction."""
    p = adj.shape[0]
    seen = [False] * p
    comps = []
    for start in range(p):
        if seen[start]:
            continue
        queue = [start]
        seen[start] = True
        comp = []
        while queue:
            v = queue.pop(0)
            comp.append(v)
            for w in range(p):
                if adj[v, w] and not seen[w]:
                    seen[w] = True
                    queue.append(w)
        comps.append(tuple(sorted(comp)))
    return sorted(comps)


class TestPairIsScreenable:
    def test_zero_vector_true(self):
        assert pair_is_screenable(np.zeros(2), PenaltyParams(0.01, 0.01))

    def test_two_graph_instantiation(self):
        # K=2 conditions: |a| <= l1+l2, |b| <= l1+l2, |a+b| <= 2*l1
        params = PenaltyParams(0.08, 0.1)
        assert abs(0.17) <= 0.18
        assert not pair_is_screenable(np.array([0.17, 0.17]), params)
        assert pair_is_screenable(np.array([0.17, -0.17]), params)
        assert not pair_is_screenable(np.array([0.19, -0.17]), params)

    def test_requires_two_graphs(self):
        with pytest.raises(ParameterError):
            pair_is_screenable(np.array([0.5]), PenaltyParams(1.0, 1.0))

    def test_boundary_tie_counts_as_screenable(self):
        # non-strict comparisons: exactly at the bound is screenable
        params = PenaltyParams(0.1, 0.2)
        assert pair_is_screenable(np.array([0.3, -0.2]), params)

    def test_threshold_sharpness(self):
        # s sits on the boundary of exactly one condition (|s_1| = l1+l2,
        # all others slack); an epsilon push flips the verdict
        params = PenaltyParams(0.1, 0.2)
        eps = 1e-6
        assert pair_is_screenable(np.array([0.3, -0.2]), params)
        assert not pair_is_screenable(np.array([0.3 + eps, -0.2]), params)
        assert pair_is_screenable(np.array([0.3 - eps, -0.2]), params)


class TestSegmentDualCheck:
    def test_agrees_with_windows_small_k(self, rng):
        for k in (2, 3, 5):
            for _ in range(1000):
                params = PenaltyParams(float(rng.uniform(0.02, 0.5)),
                                       float(rng.uniform(0.02, 0.5)))
                s_vec = rng.uniform(-1, 1, k)
                assert segment_dual_check(s_vec, params) \
                    == pair_is_screenable(s_vec, params)

    def test_hand_example_k3(self):
        params = PenaltyParams(0.5, 0.6)
        # segment (1,0,0): f = 1 - 0.5 - 0.6 = -0.1 <= 0; all others hold
        assert segment_dual_check(np.array([1.0, 0.0, 0.0]), params)
        # bumping the first entry breaks the prefix-of-length-1 segment
        assert not segment_dual_check(np.array([1.2, 0.0, 0.0]), params)

    def test_single_graph_reduces_to_l1(self):
        params = PenaltyParams(0.5, 0.9)
        assert segment_dual_check(np.array([0.49]), params)
        assert segment_dual_check(np.array([0.5]), params)
        assert not segment_dual_check(np.array([0.51]), params)


class TestBuildAdjacency:
    def test_diagonal_covariances_give_identity(self):
        s = validate_covariances(
            CovarianceSet(np.stack([np.diag([1.0, 2.0, 3.0])] * 2)))
        adj = build_adjacency(s, PenaltyParams(0.05, 0.05))
        assert np.array_equal(adj.entries, np.eye(3, dtype=bool))

    def test_huge_lambda1_screens_everything(self, rng):
        s = random_covariances(rng, 6, 3)
        big = float(np.abs(s.matrices).max()) * 10
        adj = build_adjacency(s, PenaltyParams(big, 0.05))
        assert np.array_equal(adj.entries, np.eye(6, dtype=bool))

    def test_block_instance_has_no_cross_edges(self):
        truth = gen_block_model(24, 2, 4, seed=11)
        s = sample_gaussian(truth.theta_true, 240, seed=12)
        adj = build_adjacency(s, PenaltyParams(0.3, 0.1))
        for a, block_a in enumerate(truth.partition.blocks):
            for block_b in truth.partition.blocks[a + 1:]:
                assert not adj.entries[np.ix_(block_a, block_b)].any()

    def test_edges_shrink_as_lambda1_grows(self, rng):
        s = random_covariances(rng, 10, 3, n=40)
        e_small = build_adjacency(s, PenaltyParams(0.05, 0.1)).entries
        e_large = build_adjacency(s, PenaltyParams(0.15, 0.1)).entries
        assert np.all(e_large <= e_small)


class TestConnectedComponents:
    def test_identity_gives_singletons(self):
        part = connected_components(AdjacencyMatrix(np.eye(4, dtype=bool)))
        assert part.blocks == ((0,), (1,), (2,), (3,))

    def test_chain(self):
        e = np.eye(4, dtype=bool)
        for i, j in [(0, 1), (1, 2)]:
            e[i, j] = e[j, i] = True
        part = connected_components(AdjacencyMatrix(e))
        assert part.blocks == ((0, 1, 2), (3,))

    def test_matches_naive_bfs(self, rng):
        for _ in range(30):
            p = int(rng.integers(2, 25))
            e = np.eye(p, dtype=bool)
            for _ in range(int(rng.integers(0, p))):
                i, j = rng.integers(0, p, 2)
                e[i, j] = e[j, i] = True
            part = connected_components(AdjacencyMatrix(e))
            assert sorted(part.blocks) == naive_bfs_components(e)


class TestExtractAssemble:
    def test_full_block_is_identity_copy(self, rng):
        s = random_covariances(rng, 5, 2)
        sub = extract_block(s, range(5))
        assert np.array_equal(sub.matrices, s.matrices)

    def test_singleton_block(self, rng):
        s = random_covariances(rng, 5, 2)
        sub = extract_block(s, [2])
        assert sub.matrices.shape == (2, 1, 1)
        assert sub.matrices[0, 0, 0] == s.matrices[0, 2, 2]

    def test_two_block_slicing(self, rng):
        s = random_covariances(rng, 6, 2)
        sub = extract_block(s, [1, 3, 4])
        for k in range(2):
            for a, i in enumerate([1, 3, 4]):
                for b, j in enumerate([1, 3, 4]):
                    assert sub.matrices[k, a, b] == s.matrices[k, i, j]

    def test_out_of_range_rejected(self, rng):
        s = random_covariances(rng, 4, 2)
        with pytest.raises(ParameterError):
            extract_block(s, [3, 4])

    def test_assemble_single_block_passthrough(self, rng):
        s = random_covariances(rng, 3, 2)
        part = BlockPartition((tuple(range(3)),), 3)
        out = assemble_solution([s.matrices], part)
        assert np.array_equal(out.matrices, s.matrices)

    def test_assemble_two_singletons(self):
        part = BlockPartition(((0,), (1,)), 2)
        a = np.full((2, 1, 1), 3.0)
        b = np.full((2, 1, 1), 5.0)
        out = assemble_solution([a, b], part)
        assert np.array_equal(out.matrices[0], np.diag([3.0, 5.0]))

    def test_dimension_mismatch_rejected(self):
        part = BlockPartition(((0, 1), (2,)), 3)
        with pytest.raises(ParameterError):
            assemble_solution([np.ones((2, 1, 1)), np.ones((2, 1, 1))], part)

    def test_assembled_equals_whole_solve(self):
        # the central screening test: block-decomposed solve equals the
        # undecomposed solve entrywise
        truth = gen_block_model(12, 2, 3, seed=3)
        s = sample_gaussian(truth.theta_true, 120, seed=4)
        params = PenaltyParams(0.25, 0.1)
        config = SolverConfig(outer_tol=1e-7, inner=NspgConfig(tol=1e-8))
        whole, _ = solve_fmgl(s, params, config)
        part = connected_components(build_adjacency(s, params))
        assert len(part.blocks) > 1
        subs = []
        for block in part.blocks:
            if len(block) == 1:
                v = s.matrices[:, block[0], block[0]]
                subs.append((1.0 / v).reshape(-1, 1, 1))
            else:
                sol, _ = solve_fmgl(extract_block(s, block), params, config)
                subs.append(sol.matrices)
        assembled = assemble_solution(subs, part)
        assert np.abs(assembled.matrices - whole.matrices).max() < 1e-4


class TestUnscreenedSolutionIsBlockDiagonal:
    def test_cross_block_entries_vanish(self):
        # Solve without screening, then check the solution really is
        # block diagonal with respect to the screening partition.
        truth = gen_block_model(15, 3, 3, seed=21)
        s = sample_gaussian(truth.theta_true, 150, seed=22)
        params = PenaltyParams(0.22, 0.08)
        config = SolverConfig(outer_tol=1e-7, inner=NspgConfig(tol=1e-8))
        sol, _ = solve_fmgl(s, params, config)
        part = connected_components(build_adjacency(s, params))
        assert len(part.blocks) > 1
        for a, block_a in enumerate(part.blocks):
            for block_b in part.blocks[a + 1:]:
                cross = sol.matrices[np.ix_(range(3), block_a, block_b)]
                assert np.abs(cross).max() < 1e-5


class TestBlockPartitionInvariants:
    def test_blocks_sorted_deterministically(self):
        part = BlockPartition(((3, 1), (0, 2)), 4)
        assert part.blocks == ((0, 2), (1, 3))

    def test_rejects_non_partition(self):
        with pytest.raises(ParameterError):
            BlockPartition(((0, 1), (1, 2)), 3)
        with pytest.raises(ParameterError):
            BlockPartition(((0,),), 2)
