"""Solver x preconditioner grids on one matrix, with CSV/JSON output."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..eigdefl import EigConfig, cached_negative_eigenpairs
from ..errors import MinresCGError, SpecError
from ..krylov import NESTED_SOLVERS, SolveConfig, SolveReport, parse_solver_spec, run_solver
from ..precond import build_preconditioner, parse_precond_spec
from ..sparse import SparseSymMatrix, load_matrix_market
from .fetch import default_cache_dir, fetch_matrix

__all__ = [
    "PROFILES",
    "ExperimentSpec",
    "ResultRow",
    "load_problem",
    "make_rhs",
    "run_experiment",
    "write_results",
    "residual_history_export",
    "storage_vectors",
    "RESULT_COLUMNS",
]

log = logging.getLogger(__name__)

# (rel_tol, inner_tol, max_iters)
PROFILES = {
    "suitesparse": (1e-5, 1e-3, 20_000),
    "brake-small": (1e-3, 1e-2, 2_000),
    "brake-large": (1e-3, 1e-2, 15_000),
}

RHS_GENERATOR = "numpy.random.default_rng(seed).uniform(-1, 1, n)"

RESULT_COLUMNS = (
    "matrix", "n", "nnz", "k", "solver", "precond", "outer", "o(i)", "inner_avg", "total",
    "status", "final_relres", "vectors", "wall_time",
)


def storage_vectors(solver: str, k: int | None = None) -> int | None:
    """Auxiliary vectors a solver keeps besides ``A``, the preconditioner and ``b``.

    MINRES 7, MINRES-CG ``11 + k``, GMRES(m) ``m + 2``, FGMRES(m1)-GMRES(m2)
    ``2 m1 + m2 + 4`` (``3m + 4`` for equal restarts), BiCGStab 6. Returns
    ``None`` for solvers without a tabulated count.
    """
    name, params = parse_solver_spec(solver)
    if name == "minres":
        return 7
    if name in NESTED_SOLVERS:
        return None if k is None else 11 + int(k)
    if name == "gmres":
        return params["restart"] + 2
    if name == "fgmres":
        return 2 * params["restart"] + params["inner_restart"] + 4
    if name == "bicgstab":
        return 6
    return None


@dataclass
class ExperimentSpec:
    """One matrix, a list of solvers and a list of preconditioners.

    ``matrix`` is a Matrix Market path or a known collection id. Every
    solver is run with every preconditioner; for ``minres-cg`` the
    preconditioner is the inner ``M_cg``, for ``minres-cg-star`` it is the
    approximate inverse placed inside the SMW form.
    """

    matrix: str
    solvers: list[str]
    preconds: list[str] = field(default_factory=lambda: ["ilu0"])
    shift: float = 0.0
    rhs: str = "random"
    seed: int = 0
    rel_tol: float = 1e-5
    inner_tol: float = 1e-3
    max_iters: int = 20_000
    out_dir: str | None = None
    workers: int = 1
    histories: bool = True
    eig_tol: float = 1e-8
    cache_dir: str | None = None
    ldlt_ordering: str = "mindeg"

    def __post_init__(self):
        if not self.solvers:
            raise SpecError("at least one solver is required")
        if not 0 < self.rel_tol < 1:
            raise SpecError("rel_tol must lie in (0, 1)")
        for s in self.solvers:
            parse_solver_spec(s)
        for p in self.preconds:
            parse_precond_spec(p)

    @property
    def label(self) -> str:
        base = Path(self.matrix).name
        for suffix in (".gz", ".mtx"):
            base = base.removesuffix(suffix)
        return f"{base}(sigma={self.shift:g})" if self.shift else base


@dataclass(frozen=True)
class ResultRow:
    matrix: str
    n: int
    nnz: int
    k: int | None
    solver: str
    precond: str
    outer: float | None
    gmres_oi: str | None
    inner_avg: float | None
    total: float | None
    status: str
    final_relres: float | None
    vectors: int | None
    wall_time: float
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "ok"

    def csv_values(self, with_time: bool = True):
        def num(v, fmt="{:g}"):
            return "" if v is None or (isinstance(v, float) and math.isnan(v)) else fmt.format(v)

        vals = [
            self.matrix, self.n, self.nnz, num(self.k), self.solver, self.precond, num(self.outer),
            self.gmres_oi or "", num(self.inner_avg, "{:.6g}"), num(self.total), self.status,
            num(self.final_relres, "{:.6e}"), num(self.vectors),
        ]
        if with_time:
            vals.append(f"{self.wall_time:.4f}")
        return vals


def load_problem(spec: ExperimentSpec) -> SparseSymMatrix:
    path = Path(spec.matrix)
    if not path.exists():
        path = fetch_matrix(spec.matrix, spec.cache_dir)
    A = load_matrix_market(path)
    return A.shifted(spec.shift) if spec.shift else A


def make_rhs(kind: str, n: int, seed: int) -> np.ndarray:
    """``random`` (uniform on [-1, 1] from ``default_rng(seed)``), ``ones`` or a path to a vector file."""
    if kind == "random":
        return np.random.default_rng(seed).uniform(-1.0, 1.0, n)
    if kind == "ones":
        return np.ones(n)
    b = np.loadtxt(kind, dtype=np.float64, ndmin=1)
    if b.shape != (n,):
        raise SpecError(f"rhs file {kind} has {b.size} entries, matrix has {n} rows")
    return b


def _needs_basis(spec: ExperimentSpec) -> bool:
    if any(parse_solver_spec(s)[0] in NESTED_SOLVERS for s in spec.solvers):
        return True
    return any(parse_precond_spec(p)[0] == "smw" for p in spec.preconds)


def run_experiment(spec: ExperimentSpec, A: SparseSymMatrix | None = None):
    """Run the grid. Returns ``(rows, reports)`` with ``reports[i]`` None for setup failures.

    Matrix loading errors propagate. Failures to build a preconditioner or
    basis become rows with status ``setup``; solver failures never abort
    the grid.
    """
    A = A if A is not None else load_problem(spec)
    b = make_rhs(spec.rhs, A.n, spec.seed)
    name = spec.label

    basis = basis_error = None
    if _needs_basis(spec):
        try:
            cache = Path(spec.cache_dir or default_cache_dir()) / "deflation"
            basis = cached_negative_eigenpairs(A, EigConfig(eig_tol=spec.eig_tol, seed=spec.seed), cache)
        except (MinresCGError, ArithmeticError, OSError) as exc:
            basis_error = f"deflation basis: {exc}"
    k = None if basis is None else basis.k

    preconds: dict[str, object] = {}
    for p in spec.preconds:
        try:
            preconds[p] = build_preconditioner(p, A, basis=basis, ordering=spec.ldlt_ordering)
        except (MinresCGError, ArithmeticError) as exc:
            preconds[p] = exc

    cfg = SolveConfig(rel_tol=spec.rel_tol, inner_tol=spec.inner_tol, max_iters=spec.max_iters)
    cells = [(s, p) for s in spec.solvers for p in spec.preconds]

    def run_cell(cell):
        solver, pspec = cell
        vectors = storage_vectors(solver, k)
        setup = None
        M = preconds[pspec]
        if isinstance(M, Exception):
            setup = f"preconditioner {pspec}: {M}"
        elif parse_solver_spec(solver)[0] in NESTED_SOLVERS and basis is None:
            setup = basis_error or "no deflation basis"
        if setup is not None:
            row = ResultRow(name, A.n, A.nnz, k, solver, pspec, None, None, None, None, "setup", None,
                            vectors, 0.0, setup)
            return row, None
        t0 = time.perf_counter()
        _, rep = run_solver(solver, A, b, M, basis=basis, cfg=cfg)
        wall = time.perf_counter() - t0
        row = ResultRow(
            name, A.n, A.nnz, k, solver, pspec, rep.outer_iters, rep.gmres_notation(),
            rep.inner_iters_avg, rep.total_iters, rep.status, rep.final_relative_residual, vectors, wall,
            rep.message,
        )
        return row, rep

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]
    rows = [r for r, _ in results]
    reports = [rep for _, rep in results]
    if spec.out_dir:
        write_results(spec, rows, reports, spec.out_dir)
    return rows, reports


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-." else "_" for c in text)


def write_results(spec: ExperimentSpec, rows, reports, out_dir) -> None:
    """``results.csv``, ``results.json`` and, optionally, one residual history CSV per cell."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for row in rows:
            w.writerow(row.csv_values())
    meta = {
        "spec": asdict(spec),
        "rhs_generator": RHS_GENERATOR if spec.rhs == "random" else spec.rhs,
        "seed": spec.seed,
        "rows": [asdict(r) for r in rows],
    }
    (out / "results.json").write_text(json.dumps(meta, indent=2, default=_json_default))
    if spec.histories:
        hist = out / "histories"
        hist.mkdir(exist_ok=True)
        for row, rep in zip(rows, reports):
            if rep is not None:
                residual_history_export(rep, hist / f"{_slug(row.solver)}__{_slug(row.precond)}.csv")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def residual_history_export(report: SolveReport, path) -> None:
    """Two-column CSV ``iteration_index, relative_residual``.

    Nested MINRES-CG histories are indexed by the cumulative inner iteration
    count at each outer step.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("iteration_index", "relative_residual"))
        for idx, rr in zip(report.history_index, report.true_residual_history):
            w.writerow((f"{idx:g}", repr(float(rr))))
