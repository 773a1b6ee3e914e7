"""Fused multiple graphical lasso: joint estimation of K sparse precision
matrices with an l1 + sequential fused penalty.

Exact block-diagonal screening decomposes large problems into
independent subproblems; a proximal Newton method with shrinking solves
each block; an ADMM baseline cross-checks objectives.
"""

from .admm import AdmmConfig, admm_solve
from .core import (CovarianceSet, PenaltyParams, PrecisionSet, SolveReport,
                   kkt_residual, neg_log_likelihood, objective, penalty,
                   validate_covariances)
from .datagen import (GroundTruth, edge_accuracy, gen_block_model,
                      gen_drift_model, sample_gaussian, stable_edges,
                      tune_lambda1)
from .errors import DataError, FmglError, NumericalError, ParameterError
from .fusedprox import ProxProblem, flsa, flsa_residual, soft_threshold, tv_prox
from .newton import SolverConfig, solve_fmgl, solve_with_screening
from .screening import (AdjacencyMatrix, BlockPartition, assemble_solution,
                        build_adjacency, connected_components, extract_block,
                        pair_is_screenable, segment_dual_check)
from .subproblem import NspgConfig

__all__ = [
    "AdjacencyMatrix", "AdmmConfig", "BlockPartition", "CovarianceSet",
    "DataError", "FmglError", "GroundTruth", "NspgConfig", "NumericalError",
    "ParameterError", "PenaltyParams", "PrecisionSet", "ProxProblem",
    "SolveReport", "SolverConfig", "admm_solve", "assemble_solution",
    "build_adjacency", "connected_components", "edge_accuracy",
    "extract_block", "flsa", "flsa_residual", "gen_block_model",
    "gen_drift_model", "kkt_residual", "neg_log_likelihood", "objective",
    "pair_is_screenable", "penalty", "sample_gaussian",
    "segment_dual_check", "soft_threshold", "solve_fmgl",
    "solve_with_screening", "stable_edges", "tune_lambda1", "tv_prox",
    "validate_covariances",
]
