"""Restarted GMRES and flexible inner-outer FGMRES-GMRES.

Both stop on the true relative residual ``||b - A x_j|| / ||b||``, computed
explicitly at every step. That costs an extra product per step but puts them
on the same footing as the other solvers.
"""

from __future__ import annotations

import math

import numpy as np

from ..precond.base import as_action
from .report import SolveConfig, SolveReport, StagnationMonitor, prepare

__all__ = ["gmres_restarted", "fgmres_gmres"]


def _givens(a: float, b: float) -> tuple[float, float, float]:
    if b == 0.0:
        return 1.0, 0.0, a
    r = math.hypot(a, b)
    return a / r, b / r, r


def gmres_restarted(op, precond, b, cfg: SolveConfig | None = None, *, callback=None, method: str | None = None):
    """Left-preconditioned GMRES(m), ``m = cfg.restart``.

    The report carries ``restart_cycles`` (o) and ``last_cycle_iters`` (i);
    ``outer_iters`` is the flattened ``(o - 1) * m + i``.
    """
    cfg = cfg or SolveConfig()
    apply, n, b, x = prepare(op, b, cfg)
    M = as_action(precond)
    m = int(cfg.restart)
    report = SolveReport(method=method or f"gmres({m})", precond_label=M.label, restart=m)
    bnorm = float(np.linalg.norm(b)) or 1.0
    relres = float(np.linalg.norm(b - apply(x))) / bnorm
    report.record(0, relres)
    if relres <= cfg.rel_tol:
        report.converged = True
        report.restart_cycles, report.last_cycle_iters = 0, 0
        return x, report

    max_iters = int(cfg.max_iters)
    stag = StagnationMonitor()
    total = 0
    cycle = 0
    V = np.empty((m + 1, n))
    H = np.zeros((m + 1, m))
    while total < max_iters:
        cycle += 1
        z = M(b - apply(x))
        beta = float(np.linalg.norm(z))
        if not math.isfinite(beta) or beta == 0.0:
            report.fail("scalar_breakdown" if not math.isfinite(beta) else "stagnation",
                        "preconditioned residual vanished before the true residual")
            return x, report
        V[0] = z / beta
        H[:] = 0.0
        g = np.zeros(m + 1)
        g[0] = beta
        cs = np.zeros(m)
        sn = np.zeros(m)
        xj = x
        for j in range(m):
            w = M(apply(V[j]))
            for i in range(j + 1):
                H[i, j] = float(w @ V[i])
                w = w - H[i, j] * V[i]
            h_next = float(np.linalg.norm(w))
            H[j + 1, j] = h_next
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            cs[j], sn[j], H[j, j] = _givens(H[j, j], H[j + 1, j])
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            if not math.isfinite(H[j, j]) or H[j, j] == 0.0:
                report.fail("scalar_breakdown", "singular Hessenberg matrix")
                return x, report
            y = _back_substitute(H, g, j + 1)
            xj = x + V[: j + 1].T @ y
            total += 1
            relres = float(np.linalg.norm(b - apply(xj))) / bnorm
            report.record(total, relres)
            report.outer_iters = total
            report.restart_cycles, report.last_cycle_iters = cycle, j + 1
            if callback is not None:
                callback(xj, total)
            if relres <= cfg.rel_tol:
                report.converged = True
                return xj, report
            if stag.push(relres):
                report.fail("stagnation", "no residual reduction over the stagnation window")
                return xj, report
            if total >= max_iters:
                break
            lucky = h_next <= 1e-14 * beta
            if lucky:
                break
            V[j + 1] = w / h_next
        x = xj
    report.fail("max_iters", f"no convergence in {max_iters} iterations")
    return x, report


def _back_substitute(H, g, k):
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        y[i] = (g[i] - H[i, i + 1:k] @ y[i + 1:k]) / H[i, i]
    return y


def fgmres_gmres(op, precond, b, cfg: SolveConfig | None = None, *, callback=None, method: str | None = None):
    """Flexible GMRES(m1) whose preconditioner is an inner GMRES(m2) solve.

    ``cfg.restart`` is m1, ``cfg.inner_restart`` is m2, and each inner solve
    runs to ``cfg.inner_tol`` with ``precond``. With ``inner_tol == 0`` the
    inner solve is disabled and ``precond`` is applied directly, which makes
    this right-preconditioned GMRES. ``cfg.max_iters`` caps outer plus inner
    iterations.
    """
    cfg = cfg or SolveConfig()
    apply, n, b, x = prepare(op, b, cfg)
    M = as_action(precond)
    m = int(cfg.restart)
    m2 = int(cfg.inner_restart)
    report = SolveReport(method=method or f"fgmres({m})-gmres({m2})", precond_label=M.label, restart=m)
    bnorm = float(np.linalg.norm(b)) or 1.0
    relres = float(np.linalg.norm(b - apply(x))) / bnorm
    report.record(0, relres)
    if relres <= cfg.rel_tol:
        report.converged = True
        report.restart_cycles, report.last_cycle_iters = 0, 0
        return x, report

    max_iters = int(cfg.max_iters)
    stag = StagnationMonitor()
    total = 0
    cycle = 0
    V = np.empty((m + 1, n))
    Z = np.empty((m, n))
    H = np.zeros((m + 1, m))

    def budget_left():
        return max_iters - total - report.inner_iters_total

    while budget_left() > 0:
        cycle += 1
        r = b - apply(x)
        beta = float(np.linalg.norm(r))
        V[0] = r / beta
        H[:] = 0.0
        g = np.zeros(m + 1)
        g[0] = beta
        cs = np.zeros(m)
        sn = np.zeros(m)
        xj = x
        for j in range(m):
            if cfg.inner_tol > 0:
                inner_cfg = SolveConfig(
                    rel_tol=cfg.inner_tol,
                    max_iters=max(1, min(cfg.inner_max_iters, budget_left() - 1)),
                    restart=m2,
                )
                Z[j], inner = gmres_restarted(op, M, V[j], inner_cfg)
                report.inner_iters.append(int(inner.outer_iters))
            else:
                Z[j] = M(V[j])
                report.inner_iters.append(0)
            w = apply(Z[j])
            for i in range(j + 1):
                H[i, j] = float(w @ V[i])
                w = w - H[i, j] * V[i]
            h_next = float(np.linalg.norm(w))
            H[j + 1, j] = h_next
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            cs[j], sn[j], H[j, j] = _givens(H[j, j], H[j + 1, j])
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            if not math.isfinite(H[j, j]) or H[j, j] == 0.0:
                report.fail("scalar_breakdown", "singular Hessenberg matrix")
                return x, report
            y = _back_substitute(H, g, j + 1)
            xj = x + Z[: j + 1].T @ y
            total += 1
            relres = float(np.linalg.norm(b - apply(xj))) / bnorm
            report.record(total, relres)
            report.outer_iters = total
            report.restart_cycles, report.last_cycle_iters = cycle, j + 1
            if callback is not None:
                callback(xj, total)
            if relres <= cfg.rel_tol:
                report.converged = True
                return xj, report
            if stag.push(relres):
                report.fail("stagnation", "no residual reduction over the stagnation window")
                return xj, report
            if budget_left() <= 0 or h_next <= 1e-14 * beta:
                break
            V[j + 1] = w / h_next
        x = xj
    report.fail("max_iters", f"no convergence within {max_iters} total iterations")
    return x, report
