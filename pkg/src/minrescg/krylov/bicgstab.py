"""Right-preconditioned BiCGStab with half-step convergence checks."""

from __future__ import annotations

import math

import numpy as np

from ..precond.base import as_action
from .report import SolveConfig, SolveReport, StagnationMonitor, prepare

__all__ = ["bicgstab"]

_TINY = 1e-300


def bicgstab(op, precond, b, cfg: SolveConfig | None = None, *, callback=None, method: str = "bicgstab"):
    """BiCGStab counting half iterations.

    Convergence at the intermediate ``s`` vector is reported as ``k - 0.5``
    iterations. Residual norms come from the recurrences and are confirmed
    with an explicit ``b - A x`` before declaring convergence. ``rho`` or
    ``omega`` below 1e-300 in magnitude is a scalar breakdown.
    """
    cfg = cfg or SolveConfig()
    apply, n, b, x = prepare(op, b, cfg)
    M = as_action(precond)
    report = SolveReport(method=method, precond_label=M.label)
    bnorm = float(np.linalg.norm(b)) or 1.0

    r = b - apply(x)
    relres = float(np.linalg.norm(r)) / bnorm
    report.record(0, relres)
    if relres <= cfg.rel_tol:
        report.converged = True
        return x, report

    rhat = r.copy()
    rho_prev = alpha = omega = 1.0
    p = np.zeros(n)
    v = np.zeros(n)
    stag = StagnationMonitor()
    max_iters = int(cfg.max_iters)

    def confirm(xc, it):
        rel = float(np.linalg.norm(b - apply(xc))) / bnorm
        report.record(it, rel)
        report.outer_iters = it
        return rel <= cfg.rel_tol

    for k in range(1, max_iters + 1):
        rho = float(rhat @ r)
        if not math.isfinite(rho) or abs(rho) < _TINY:
            report.fail("scalar_breakdown", f"rho = {rho:.3e}")
            return x, report
        if k == 1:
            p = r.copy()
        else:
            beta = (rho / rho_prev) * (alpha / omega)
            p = r + beta * (p - omega * v)
        phat = M(p)
        v = apply(phat)
        denom = float(rhat @ v)
        if not math.isfinite(denom) or abs(denom) < _TINY:
            report.fail("scalar_breakdown", f"rhat'v = {denom:.3e}")
            return x, report
        alpha = rho / denom
        s = r - alpha * v
        x_half = x + alpha * phat
        half = k - 0.5
        if float(np.linalg.norm(s)) / bnorm <= cfg.rel_tol and confirm(x_half, half):
            report.converged = True
            return x_half, report

        shat = M(s)
        t = apply(shat)
        tt = float(t @ t)
        if not math.isfinite(tt) or tt < _TINY:
            report.fail("scalar_breakdown", f"t't = {tt:.3e}")
            return x_half, report
        omega = float(t @ s) / tt
        if not math.isfinite(omega) or abs(omega) < _TINY:
            report.fail("scalar_breakdown", f"omega = {omega:.3e}")
            return x_half, report
        x = x_half + omega * shat
        r = s - omega * t
        relres = float(np.linalg.norm(r)) / bnorm
        if callback is not None:
            callback(x, k)
        if relres <= cfg.rel_tol:
            if confirm(x, k):
                report.converged = True
                return x, report
            r = b - apply(x)
        else:
            report.record(k, relres)
            report.outer_iters = k
        if stag.push(report.true_residual_history[-1]):
            report.fail("stagnation", "no residual reduction over the stagnation window")
            return x, report
        rho_prev = rho

    report.fail("max_iters", f"no convergence in {max_iters} iterations")
    return x, report
