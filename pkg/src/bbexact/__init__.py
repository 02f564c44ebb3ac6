"""Exact conditional goodness-of-fit tests for first-order Poisson models on Box-Behnken designs."""

__version__ = "0.1.0"

from bbexact.design import (
    Design,
    ModelMatrix,
    build_design,
    check_centrally_symmetric,
    model_matrix,
    recover_base_configuration,
)
from bbexact.glm import FitResult, NonConvergenceError, chisq_sf, fit, statistic
from bbexact.moves import Move, MoveSet, enumerate_basis, export_moves, move_degree_histogram
from bbexact.oracle import Fiber, FiberTooLargeError, check_connectivity, enumerate_fiber, exact_p
from bbexact.sampler import ChainConfig, TestReport, histogram, run_test, step

__all__ = [
    "ChainConfig",
    "Design",
    "Fiber",
    "FiberTooLargeError",
    "FitResult",
    "ModelMatrix",
    "Move",
    "MoveSet",
    "NonConvergenceError",
    "TestReport",
    "build_design",
    "check_centrally_symmetric",
    "check_connectivity",
    "chisq_sf",
    "enumerate_basis",
    "enumerate_fiber",
    "exact_p",
    "export_moves",
    "fit",
    "histogram",
    "model_matrix",
    "move_degree_histogram",
    "recover_base_configuration",
    "run_test",
    "statistic",
    "step",
]
