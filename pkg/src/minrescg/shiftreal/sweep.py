"""Shift-grid sweeps over a rectangle of complex shifts.

A sweep reads a small TOML file::

    omega = 5.0
    omega_ref = 5.0
    grid = "-50 1000 4 -1 20000 5"   # re_min re_max re_steps im_min im_max im_steps
    level = "inner"                   # "inner": K_E - |gamma|^2 M;  "full": the 4n system
    solver = "minres-cg"
    precond = "ilu0"
    rtol = 1e-3
    itol = 1e-2
    maxit = 2000
    seed = 0
    workers = 1
    output = "sweep.csv"

    [synthetic]                       # or: matrices = "<dir with the seven .mtx parts>"
    nx = 20
    target_negatives = 6

Each grid point gives one CSV row with columns ``gamma_r, gamma_i,
converged, outer_iters, inner_avg, total_iters``.
"""

from __future__ import annotations

import csv
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..eigdefl import EigConfig
from ..errors import MinresCGError, SpecError
from ..krylov import SolveConfig, parse_solver_spec, run_solver
from ..precond import build_preconditioner, parse_precond_spec
from .block import InnerSolverCache, ShiftSolveConfig, solve_shifted
from .qep import QepParts, ShiftParams, load_qep
from .synthetic import synthetic_qep

if sys.version_info >= (3, 11):
    import tomllib as _toml

    def _load_toml(path):
        with open(path, "rb") as fh:
            return _toml.load(fh)
else:
    import toml as _toml

    def _load_toml(path):
        with open(path, encoding="utf-8") as fh:
            return _toml.load(fh)

__all__ = [
    "SweepConfig",
    "SweepRow",
    "parse_grid",
    "load_sweep_config",
    "run_sweep",
    "write_sweep_csv",
    "SWEEP_COLUMNS",
]

SWEEP_COLUMNS = ("gamma_r", "gamma_i", "converged", "outer_iters", "inner_avg", "total_iters")


def parse_grid(spec) -> list[complex]:
    """``"re_min re_max re_steps im_min im_max im_steps"`` to a row-major list of shifts."""
    parts = spec.split() if isinstance(spec, str) else list(spec)
    if len(parts) != 6:
        raise SpecError(f"grid needs six fields, got {len(parts)}")
    try:
        re_min, re_max, im_min, im_max = (float(parts[i]) for i in (0, 1, 3, 4))
        re_steps, im_steps = int(parts[2]), int(parts[5])
    except ValueError as exc:
        raise SpecError(f"bad grid {spec!r}: {exc}") from None
    if re_steps < 1 or im_steps < 1:
        raise SpecError("grid step counts must be positive")
    res = np.linspace(re_min, re_max, re_steps)
    ims = np.linspace(im_min, im_max, im_steps)
    return [complex(r, i) for i in ims for r in res]


@dataclass
class SweepConfig:
    omega: float = 5.0
    omega_ref: float = 5.0
    grid: str = "-50 1000 3 -1 20000 3"
    level: str = "inner"
    solver: str = "minres-cg"
    precond: str = "ilu0"
    rtol: float = 1e-3
    itol: float = 1e-2
    maxit: int = 2000
    seed: int = 0
    workers: int = 1
    output: str | None = None
    matrices: str | None = None
    synthetic: dict = field(default_factory=lambda: {"nx": 20, "target_negatives": 6})

    def __post_init__(self):
        if self.level not in ("inner", "full"):
            raise SpecError(f"level must be 'inner' or 'full', not {self.level!r}")
        parse_solver_spec(self.solver)
        parse_precond_spec(self.precond)
        parse_grid(self.grid)

    def parts(self) -> QepParts:
        if self.matrices:
            return load_qep(self.matrices)
        opts = dict(self.synthetic)
        nx = int(opts.pop("nx"))
        opts.setdefault("seed", self.seed)
        return synthetic_qep(nx, **opts)


def load_sweep_config(path) -> SweepConfig:
    data = _load_toml(path)
    known = set(SweepConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise SpecError(f"unknown sweep keys: {', '.join(sorted(unknown))}")
    cfg = SweepConfig(**data)
    if cfg.matrices and not Path(cfg.matrices).is_absolute():
        cfg.matrices = str(Path(path).parent / cfg.matrices)
    return cfg


@dataclass(frozen=True)
class SweepRow:
    gamma_r: float
    gamma_i: float
    converged: bool
    outer_iters: float
    inner_avg: float | None
    total_iters: float
    status: str

    def csv_values(self):
        avg = "" if self.inner_avg is None else f"{self.inner_avg:.6g}"
        return [repr(self.gamma_r), repr(self.gamma_i), int(self.converged), f"{self.outer_iters:g}", avg,
                f"{self.total_iters:g}"]


def _inner_point(parts: QepParts, gamma: complex, cfg: SweepConfig, cache: InnerSolverCache,
                 scfg: ShiftSolveConfig) -> SweepRow:
    entry = cache.get(parts.K_E, parts.M_mass, gamma, scfg)
    rng = np.random.default_rng(cfg.seed)
    b = rng.uniform(-1.0, 1.0, entry.H.n)
    name, _ = parse_solver_spec(cfg.solver)
    if name == "minres-cg":
        precond = entry.m_cg
    else:
        precond = build_preconditioner(cfg.precond, entry.H, basis=entry.basis)
    solve_cfg = SolveConfig(rel_tol=cfg.rtol, inner_tol=cfg.itol, max_iters=cfg.maxit)
    _, rep = run_solver(cfg.solver, entry.H, b, precond, basis=entry.basis, cfg=solve_cfg)
    return SweepRow(gamma.real, gamma.imag, rep.converged, rep.outer_iters, rep.inner_iters_avg,
                    rep.total_iters, rep.status)


def _full_point(parts: QepParts, gamma: complex, cfg: SweepConfig, cache: InnerSolverCache,
                scfg: ShiftSolveConfig) -> SweepRow:
    params = ShiftParams(cfg.omega, cfg.omega_ref, gamma.real, gamma.imag)
    rng = np.random.default_rng(cfg.seed)
    n2 = 2 * parts.n
    b = rng.uniform(-1.0, 1.0, n2) + 1j * rng.uniform(-1.0, 1.0, n2)
    _, rep = solve_shifted(parts, params, b, scfg, cache)
    inner = rep.inner_cg_iters
    avg = float(np.mean(inner)) if inner else None
    return SweepRow(gamma.real, gamma.imag, rep.converged, rep.outer.outer_iters, avg,
                    rep.outer.outer_iters + sum(inner), rep.outer.status)


def run_sweep(cfg: SweepConfig, parts: QepParts | None = None) -> list[SweepRow]:
    """Solve at every grid shift; rows come back in grid order whatever the worker count."""
    parts = parts if parts is not None else cfg.parts()
    shifts = parse_grid(cfg.grid)
    cache = InnerSolverCache()
    scfg = ShiftSolveConfig(
        inner_precond=cfg.precond,
        cg_tol=cfg.itol,
        outer_tol=cfg.rtol,
        outer_max_iters=cfg.maxit,
        eig=EigConfig(seed=cfg.seed),
    )
    point = _inner_point if cfg.level == "inner" else _full_point

    def one(gamma):
        try:
            return point(parts, gamma, cfg, cache, scfg)
        except (MinresCGError, ArithmeticError):
            return SweepRow(gamma.real, gamma.imag, False, math.nan, None, math.nan, "setup")

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(one, shifts))
    return [one(g) for g in shifts]


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow(row.csv_values())
