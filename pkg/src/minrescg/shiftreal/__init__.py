"""Complex shifted systems from a parametric brake-squeal QEP, solved in real arithmetic."""

from .block import (
    InnerSolverCache,
    RealBlockSystem,
    SchurSolver,
    ShiftPreconditioner,
    ShiftSolveConfig,
    ShiftSolveReport,
    block_precond_apply,
    inner_matrix,
    real_block_system,
    schur_s2,
    schur_solve,
    solve_shifted,
)
from .qep import QepParts, ShiftParams, assemble_qep, companion_pencil, load_qep
from .sweep import SweepConfig, SweepRow, load_sweep_config, parse_grid, run_sweep, write_sweep_csv
from .synthetic import laplacian_2d, mass_matrix_2d, synthetic_qep

__all__ = [
    "QepParts",
    "ShiftParams",
    "assemble_qep",
    "companion_pencil",
    "load_qep",
    "RealBlockSystem",
    "real_block_system",
    "ShiftSolveConfig",
    "ShiftSolveReport",
    "InnerSolverCache",
    "inner_matrix",
    "schur_s2",
    "SchurSolver",
    "schur_solve",
    "ShiftPreconditioner",
    "block_precond_apply",
    "solve_shifted",
    "SweepConfig",
    "SweepRow",
    "parse_grid",
    "load_sweep_config",
    "run_sweep",
    "write_sweep_csv",
    "laplacian_2d",
    "mass_matrix_2d",
    "synthetic_qep",
]
