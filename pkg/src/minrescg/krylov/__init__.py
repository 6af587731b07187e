"""Krylov solvers with a common report type and true-residual stopping.

Solver names accepted by :func:`parse_solver_spec`::

    minres            preconditioned MINRES
    cg                preconditioned CG
    minres-cg         MINRES with inner CG on the deflated operator
    minres-cg-star    same, inner preconditioner in SMW form
    gmres:<m>         restarted GMRES(m)
    fgmres:<m1>:<m2>  FGMRES(m1) with inner GMRES(m2)
    bicgstab          BiCGStab
"""

from __future__ import annotations

from dataclasses import replace

from ..errors import SpecError
from .bicgstab import bicgstab
from .cg import pcg
from .gmres import fgmres_gmres, gmres_restarted
from .minres import minres
from .nested import minres_cg, minres_cg_star
from .report import (
    FAILURE_KINDS,
    STATUS_SYMBOL,
    SolveConfig,
    SolveReport,
    StagnationMonitor,
    as_operator,
    relative_residual,
)

__all__ = [
    "SolveConfig",
    "SolveReport",
    "FAILURE_KINDS",
    "STATUS_SYMBOL",
    "StagnationMonitor",
    "as_operator",
    "relative_residual",
    "minres",
    "pcg",
    "gmres_restarted",
    "fgmres_gmres",
    "bicgstab",
    "minres_cg",
    "minres_cg_star",
    "parse_solver_spec",
    "run_solver",
    "NESTED_SOLVERS",
]

NESTED_SOLVERS = ("minres-cg", "minres-cg-star")


def parse_solver_spec(spec: str) -> tuple[str, dict]:
    """Return ``(name, params)``; params hold restart lengths where relevant."""
    name, _, rest = spec.strip().lower().partition(":")
    try:
        if name in ("minres", "cg", "bicgstab", "minres-cg", "minres-cg-star"):
            if rest:
                raise ValueError("takes no parameters")
            return name, {}
        if name == "gmres":
            m = int(rest)
            if m < 1:
                raise ValueError("restart must be >= 1")
            return name, {"restart": m}
        if name == "fgmres":
            m1, m2 = (int(t) for t in rest.split(":"))
            if m1 < 1 or m2 < 1:
                raise ValueError("restart must be >= 1")
            return name, {"restart": m1, "inner_restart": m2}
    except ValueError as exc:
        raise SpecError(f"bad solver spec {spec!r}: {exc}") from None
    raise SpecError(
        f"unknown solver {spec!r}; expected minres, cg, minres-cg, minres-cg-star, "
        "gmres:<m>, fgmres:<m1>:<m2> or bicgstab"
    )


def run_solver(spec: str, A, b, precond=None, *, basis=None, cfg: SolveConfig | None = None, callback=None):
    """Dispatch on a solver spec string. Nested schemes need the deflation ``basis``.

    For ``minres-cg`` the ``precond`` is ``M_cg``; for ``minres-cg-star`` it
    is the approximate inverse wrapped in the SMW form.
    """
    name, params = parse_solver_spec(spec)
    cfg = replace(cfg or SolveConfig(), **params)
    if name in NESTED_SOLVERS:
        if basis is None:
            raise SpecError(f"{name} needs a deflation basis")
        fn = minres_cg if name == "minres-cg" else minres_cg_star
        return fn(A, basis, precond, b, cfg, callback=callback)
    fn = {
        "minres": minres,
        "cg": pcg,
        "gmres": gmres_restarted,
        "fgmres": fgmres_gmres,
        "bicgstab": bicgstab,
    }[name]
    return fn(A, precond, b, cfg, callback=callback)
