"""ILU(0) and threshold ILU (optionally modified) factorizations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import ZeroPivotError
from ..sparse import SparseSymMatrix
from . import _kernels
from .base import PreconditionerAction

__all__ = ["IluFactors", "ilu0", "ilut"]


@dataclass(frozen=True, eq=False)
class IluFactors:
    """``A ~ L U`` with ``L`` unit lower (strict part stored) and ``U`` upper.

    ``U`` rows store the diagonal first.
    """

    L_strict: sp.csr_matrix
    U: sp.csr_matrix
    modified: bool = False
    label: str = "ilu"

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def L(self) -> sp.csr_matrix:
        return (self.L_strict + sp.identity(self.n, format="csr")).tocsr()

    @property
    def nnz(self) -> int:
        return int(self.L_strict.nnz + self.U.nnz)

    def solve(self, g) -> np.ndarray:
        g = np.ascontiguousarray(g, dtype=np.float64)
        Lm, Um = self.L_strict, self.U
        y = _kernels.solve_lower_unit(Lm.indptr, Lm.indices, Lm.data, g)
        return _kernels.solve_upper(Um.indptr, Um.indices, Um.data, y, False)

    def action(self) -> PreconditionerAction:
        return PreconditionerAction(self.solve, self.label)


def _as_csr(A) -> sp.csr_matrix:
    if isinstance(A, SparseSymMatrix):
        return A.to_scipy()
    csr = sp.csr_matrix(A, dtype=np.float64)
    csr.sort_indices()
    return csr


def _split_upper_diag_first(csr: sp.csr_matrix) -> sp.csr_matrix:
    U = sp.triu(csr, k=0, format="csr")
    U.sort_indices()
    return U


def ilu0(A) -> IluFactors:
    """Incomplete LU with no fill: factors live on the sparsity pattern of ``A``."""
    csr = _as_csr(A)
    n = csr.shape[0]
    data, _, bad = _kernels.ilu0_kernel(
        n, csr.indptr.astype(np.int64), csr.indices.astype(np.int64), csr.data
    )
    if bad >= 0:
        raise ZeroPivotError(int(bad), f"ILU(0): zero pivot in row {bad + 1} (1-based)")
    F = sp.csr_matrix((data, csr.indices.copy(), csr.indptr.copy()), shape=csr.shape)
    L = sp.tril(F, k=-1, format="csr")
    L.sort_indices()
    return IluFactors(L, _split_upper_diag_first(F), False, "ilu0")


def ilut(A, drop_tol: float, modified: bool = False) -> IluFactors:
    """Threshold ILU.

    Entries below ``drop_tol * ||a_i||_2`` (the 2-norm of the original row) are
    dropped; for ``L`` the test uses the multiplier. With ``modified`` every
    dropped value is added to the diagonal of ``U`` in its row, preserving
    row sums.
    """
    if drop_tol < 0:
        raise ValueError("drop_tol must be nonnegative")
    csr = _as_csr(A)
    n = csr.shape[0]
    Lp, Li, Lx, Up, Ui, Ux, bad = _kernels.ilut_kernel(
        n, csr.indptr.astype(np.int64), csr.indices.astype(np.int64), csr.data,
        float(drop_tol), bool(modified),
    )
    if bad >= 0:
        raise ZeroPivotError(int(bad), f"ILUT({drop_tol:g}): zero pivot in row {bad + 1} (1-based)")
    L = sp.csr_matrix((Lx.copy(), Li.copy(), Lp.copy()), shape=(n, n))
    U = sp.csr_matrix((Ux.copy(), Ui.copy(), Up.copy()), shape=(n, n))
    label = f"milu({drop_tol:g})" if modified else f"ilut({drop_tol:g})"
    return IluFactors(L, U, bool(modified), label)
