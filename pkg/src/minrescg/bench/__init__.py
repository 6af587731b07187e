"""Benchmark harness: experiment grids, collection downloads and the command line."""

from .experiment import (
    PROFILES,
    ExperimentSpec,
    ResultRow,
    load_problem,
    make_rhs,
    residual_history_export,
    run_experiment,
    storage_vectors,
    write_results,
)
from .fetch import KNOWN_MATRICES, default_cache_dir, fetch_matrix, resolve_matrix_id

__all__ = [
    "PROFILES",
    "ExperimentSpec",
    "ResultRow",
    "load_problem",
    "make_rhs",
    "residual_history_export",
    "run_experiment",
    "storage_vectors",
    "write_results",
    "KNOWN_MATRICES",
    "default_cache_dir",
    "fetch_matrix",
    "resolve_matrix_id",
]
