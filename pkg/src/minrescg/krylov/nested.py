"""MINRES-CG: MINRES preconditioned by an inner CG solve with the deflated operator.

The outer MINRES runs on ``A`` with preconditioner ``M_mr = A + 2 V|Lam|V^T``.
Each application of ``M_mr^{-1}`` is an inner PCG solve on ``M_mr`` to a
loose tolerance, preconditioned with an approximation ``M_cg`` that may be
indefinite. The starred variant takes ``M_cg`` to be the SMW form
``A_approx^{-1} - 2 V Lam^{-1} V^T``.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..eigdefl import DeflationBasis
from ..precond.base import PreconditionerAction, as_action
from ..precond.deflation import DeflatedOperator, SmwInverse
from .cg import pcg
from .minres import minres
from .report import SolveConfig

__all__ = ["minres_cg", "minres_cg_star"]


def minres_cg(A, basis: DeflationBasis, m_cg, b, cfg: SolveConfig | None = None, *,
              callback=None, method: str = "minres-cg"):
    """Nested solve; ``cfg.max_iters`` bounds the total number of inner CG iterations.

    ``report.inner_iters`` holds one entry per inner solve, including the one
    that seeds the Lanczos process, and ``history_index`` is the cumulative
    inner count at each outer step.
    """
    cfg = cfg or SolveConfig()
    m_cg = as_action(m_cg)
    Mmr = DeflatedOperator(A, basis)
    counts: list[int] = []
    budget = int(cfg.max_iters)
    inner_cfg = SolveConfig(rel_tol=cfg.inner_tol, max_iters=cfg.inner_max_iters)

    def inner_solve(y):
        left = budget - sum(counts)
        if left <= 0:
            # budget spent; MINRES stops right after this application
            counts.append(0)
            return np.array(y, dtype=np.float64)
        z, rep = pcg(Mmr, m_cg, y, replace(inner_cfg, max_iters=min(inner_cfg.max_iters, left)))
        counts.append(int(rep.outer_iters))
        return z

    action = PreconditionerAction(inner_solve, f"cg[{m_cg.label}]")
    x, report = minres(A, action, b, cfg, callback=callback, method=method,
                       out_of_budget=lambda: sum(counts) >= budget)
    report.inner_iters = list(counts)
    # outer step j is recorded after j + 1 inner solves
    report.history_index = [0] + [
        int(sum(counts[: j + 1])) for j in range(1, len(report.true_residual_history))
    ]
    return x, report


def minres_cg_star(A, basis: DeflationBasis, inner_approx_inverse, b, cfg: SolveConfig | None = None,
                   *, callback=None):
    """MINRES-CG with ``M_cg^{-1} = inner_approx_inverse - 2 V Lam^{-1} V^T``."""
    m_cg = SmwInverse(as_action(inner_approx_inverse), basis).action()
    return minres_cg(A, basis, m_cg, b, cfg, callback=callback, method="minres-cg*")
