"""Preconditioned MINRES (Paige-Saunders recurrences) with true-residual stopping."""

from __future__ import annotations

import math

import numpy as np

from ..precond.base import as_action
from .report import SolveConfig, SolveReport, StagnationMonitor, prepare

__all__ = ["minres"]

_EPS = np.finfo(np.float64).eps


def minres(op, precond, b, cfg: SolveConfig | None = None, *, callback=None, method: str = "minres",
           out_of_budget=None):
    """Solve symmetric ``A x = b`` with an SPD preconditioner action.

    The preconditioner is applied as ``z = precond(r)`` (an approximate
    inverse). A negative ``r^T z`` means the SPD contract is violated and is
    reported as ``scalar_breakdown``. ``callback(x, it)`` runs after each
    iteration. ``out_of_budget()``, if given, is polled after each
    unconverged iteration and ends the solve with ``max_iters`` when true.
    """
    cfg = cfg or SolveConfig()
    apply, n, b, x = prepare(op, b, cfg)
    M = as_action(precond)
    report = SolveReport(method=method, precond_label=M.label)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        bnorm = 1.0

    r1 = b - apply(x)
    relres = float(np.linalg.norm(r1)) / bnorm
    report.record(0, relres)
    if relres <= cfg.rel_tol:
        report.converged = True
        return x, report

    y = M(r1)
    beta1 = float(r1 @ y)
    if not math.isfinite(beta1) or beta1 <= 0.0:
        report.fail("scalar_breakdown", f"preconditioner not positive definite (r'z = {beta1:.3e})")
        return x, report
    beta1 = math.sqrt(beta1)

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1
    stag = StagnationMonitor()
    max_iters = int(cfg.max_iters)

    for itn in range(1, max_iters + 1):
        v = y / beta
        y = apply(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = M(r2)
        oldb = beta
        beta_sq = float(r2 @ y)
        if not math.isfinite(beta_sq) or not math.isfinite(alfa):
            report.fail("scalar_breakdown", "non-finite Lanczos coefficient")
            return x, report
        if beta_sq < 0.0:
            report.fail("scalar_breakdown", f"preconditioner not positive definite (r'z = {beta_sq:.3e})")
            return x, report
        beta = math.sqrt(beta_sq)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(math.hypot(gbar, beta), _EPS)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        if not np.all(np.isfinite(x)):
            report.fail("scalar_breakdown", "non-finite iterate")
            report.outer_iters = itn
            return x, report

        relres = float(np.linalg.norm(b - apply(x))) / bnorm
        report.record(itn, relres)
        report.outer_iters = itn
        if callback is not None:
            callback(x, itn)
        if relres <= cfg.rel_tol:
            report.converged = True
            return x, report
        if beta == 0.0:
            # invariant Krylov subspace but true residual still above tolerance
            report.fail("stagnation", "Lanczos terminated without reaching the tolerance")
            return x, report
        if stag.push(relres):
            report.fail("stagnation", "no residual reduction over the stagnation window")
            return x, report
        if out_of_budget is not None and out_of_budget():
            report.fail("max_iters", "iteration budget exhausted")
            return x, report

    report.fail("max_iters", f"no convergence in {max_iters} iterations")
    return x, report
