"""Preconditioned CG that tolerates a symmetric indefinite preconditioner.

With SPD ``W`` and symmetric invertible ``M`` the usual PCG recurrences are
CG in the (indefinite) ``M``-inner product. The iterates still satisfy the
Galerkin condition ``(z - W x_m) _|_ K_m(M^{-1} W, M^{-1} r_0)`` and so still
minimize the ``W``-norm of the error over the Krylov space. Only ``p^T W p``
can vanish, and only if ``W`` is not positive definite.
"""

from __future__ import annotations

import math

import numpy as np

from ..precond.base import as_action
from .report import SolveConfig, SolveReport, prepare

__all__ = ["pcg"]

_PWP_GUARD = 1e-300


def pcg(op, precond, b, cfg: SolveConfig | None = None, *, callback=None, method: str = "cg"):
    cfg = cfg or SolveConfig()
    apply, n, b, x = prepare(op, b, cfg)
    M = as_action(precond)
    report = SolveReport(method=method, precond_label=M.label)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        report.record(0, 0.0)
        report.converged = True
        return np.zeros(n), report

    r = b - apply(x) if np.any(x) else b.copy()
    rnorm = float(np.linalg.norm(r))
    report.record(0, rnorm / bnorm)
    if rnorm / bnorm <= cfg.rel_tol:
        report.converged = True
        return x, report

    z = M(r)
    p = z.copy()
    rz = float(r @ z)
    max_iters = int(cfg.max_iters)
    for it in range(1, max_iters + 1):
        Wp = apply(p)
        pWp = float(p @ Wp)
        pp = float(p @ p)
        if not math.isfinite(pWp) or abs(pWp) < _PWP_GUARD * pp or pp == 0.0:
            report.outer_iters = it - 1
            report.fail("scalar_breakdown", f"p'Wp = {pWp:.3e}; operator is not positive definite")
            return x, report
        alpha = rz / pWp
        x = x + alpha * p
        r = r - alpha * Wp
        rnorm = float(np.linalg.norm(r))
        report.outer_iters = it
        if callback is not None:
            callback(x, it)
        if rnorm / bnorm <= cfg.rel_tol:
            # confirm against the explicitly computed residual
            r = b - apply(x)
            rnorm = float(np.linalg.norm(r))
            if rnorm / bnorm <= cfg.rel_tol:
                report.record(it, rnorm / bnorm)
                report.converged = True
                return x, report
            report.record(it, rnorm / bnorm)
            z = M(r)
            rz = float(r @ z)
            p = z.copy()
            continue
        report.record(it, rnorm / bnorm)
        z = M(r)
        rz_new = float(r @ z)
        if not math.isfinite(rz_new) or rz == 0.0:
            report.fail("scalar_breakdown", f"r'z = {rz_new:.3e}")
            return x, report
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p

    report.fail("max_iters", f"no convergence in {max_iters} iterations")
    return x, report
