"""Nested MINRES-CG solvers for sparse symmetric indefinite systems with few negative eigenvalues."""

from .eigdefl import DeflationBasis, EigConfig, negative_eigenpairs
from .krylov import (
    SolveConfig,
    SolveReport,
    bicgstab,
    fgmres_gmres,
    gmres_restarted,
    minres,
    minres_cg,
    minres_cg_star,
    pcg,
    run_solver,
)
from .precond import build_preconditioner, ildlt, ilu0, ilut
from .sparse import SparseSymMatrix, load_matrix_market, matvec, save_matrix_market

__version__ = "0.1.0"

__all__ = [
    "SparseSymMatrix",
    "load_matrix_market",
    "save_matrix_market",
    "matvec",
    "DeflationBasis",
    "EigConfig",
    "negative_eigenpairs",
    "SolveConfig",
    "SolveReport",
    "minres",
    "pcg",
    "gmres_restarted",
    "fgmres_gmres",
    "bicgstab",
    "minres_cg",
    "minres_cg_star",
    "run_solver",
    "build_preconditioner",
    "ilu0",
    "ilut",
    "ildlt",
]
