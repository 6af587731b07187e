"""The deflated absolute-value operator and its Sherman-Morrison-Woodbury inverse.

``M_mr = A + 2 V |Lam| V^T`` flips the sign of the captured negative
eigenvalues, so with an exact basis it equals ``|A|``. Its inverse is
``A^{-1} - 2 V Lam^{-1} V^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..eigdefl import DeflationBasis
from ..errors import DimensionError
from ..sparse import SparseSymMatrix, dense_block_apply, matvec
from .base import PreconditionerAction, as_action

__all__ = ["DeflatedOperator", "SmwInverse", "deflated_apply", "smw_apply"]


def _op_apply(A, u):
    if isinstance(A, SparseSymMatrix):
        return matvec(A, u)
    return A @ u


@dataclass(frozen=True, eq=False)
class DeflatedOperator:
    A: object
    basis: DeflationBasis

    def __post_init__(self):
        if self.basis.n != self.A.shape[0]:
            raise DimensionError(f"basis has {self.basis.n} rows, matrix has {self.A.shape[0]}")

    @property
    def shape(self):
        return self.A.shape

    def matvec(self, u):
        return deflated_apply(self, u)

    __call__ = matvec

    def __matmul__(self, u):
        return deflated_apply(self, u)

    def toarray(self) -> np.ndarray:
        A = self.A.toarray() if hasattr(self.A, "toarray") else np.asarray(self.A)
        V = self.basis.V
        return A + 2.0 * (V * np.abs(self.basis.lam)) @ V.T


def deflated_apply(op: DeflatedOperator, u) -> np.ndarray:
    """``A u + 2 V(|Lam|(V^T u))``; the dense operator is never formed."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (op.basis.n,):
        raise DimensionError(f"vector of shape {u.shape} for operator of size {op.basis.n}")
    y = _op_apply(op.A, u)
    if op.basis.k:
        y = y + 2.0 * dense_block_apply(op.basis.V, np.abs(op.basis.lam), u)
    return y


@dataclass(frozen=True, eq=False)
class SmwInverse:
    """``g -> inner(g) - 2 V Lam^{-1} V^T g`` where ``inner`` approximates ``A^{-1}``."""

    inner_solver: PreconditionerAction
    basis: DeflationBasis

    def __post_init__(self):
        object.__setattr__(self, "inner_solver", as_action(self.inner_solver))

    def apply(self, g):
        return smw_apply(self, g)

    def action(self) -> PreconditionerAction:
        return PreconditionerAction(self.apply, f"smw({self.inner_solver.label})")


def smw_apply(s: SmwInverse, g) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (s.basis.n,):
        raise DimensionError(f"vector of shape {g.shape} for basis of size {s.basis.n}")
    w = s.inner_solver(g)
    if s.basis.k:
        w = w - 2.0 * dense_block_apply(s.basis.V, 1.0 / s.basis.lam, g)
    return w
