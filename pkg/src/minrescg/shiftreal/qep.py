"""Parametric quadratic eigenproblem parts, assembly and companion linearization."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionError, NotSymmetricError, ShiftError
from ..sparse import SparseSymMatrix, load_matrix_market_general

__all__ = [
    "QepParts",
    "ShiftParams",
    "assemble_qep",
    "companion_pencil",
    "load_qep",
    "QEP_FILE_NAMES",
]

SYMMETRY_RTOL = 1e-12

# file stem for each part when a QEP is read from a directory
QEP_FILE_NAMES = {
    "M_mass": "M",
    "K_E": "K_E",
    "D_M": "D_M",
    "D_R": "D_R",
    "D_G": "D_G",
    "K_g": "K_g",
    "K_R": "K_R",
}


def _csr(A) -> sp.csr_matrix:
    if isinstance(A, SparseSymMatrix):
        return A.to_scipy()
    out = sp.csr_matrix(A, dtype=np.float64)
    out.sum_duplicates()
    return out


def _check_symmetry(name: str, A: sp.csr_matrix, sign: int) -> None:
    fro = sp.linalg.norm(A) if A.nnz else 0.0
    diff = A - sign * A.T
    bad = sp.linalg.norm(diff) if diff.nnz else 0.0
    if bad > SYMMETRY_RTOL * fro:
        kind = "symmetric" if sign > 0 else "skew-symmetric"
        raise NotSymmetricError(f"{name} is not {kind} (defect {bad:.3e}, norm {fro:.3e})")


@dataclass(frozen=True, eq=False)
class QepParts:
    """Coefficient matrices of ``lam^2 M + lam D(Omega) + K(Omega)``.

    ``M_mass`` and ``K_E`` must be symmetric (and positive definite, which is
    not checked here), ``D_M``, ``D_R`` and ``K_g`` symmetric, ``D_G``
    skew-symmetric, ``K_R`` arbitrary. Everything is stored as scipy CSR.
    """

    M_mass: sp.csr_matrix
    K_E: sp.csr_matrix
    D_M: sp.csr_matrix
    D_R: sp.csr_matrix
    D_G: sp.csr_matrix
    K_g: sp.csr_matrix
    K_R: sp.csr_matrix

    def __post_init__(self):
        n = None
        for f in fields(self):
            A = _csr(getattr(self, f.name))
            if A.shape[0] != A.shape[1]:
                raise DimensionError(f"{f.name} is not square: {A.shape}")
            if n is None:
                n = A.shape[0]
            elif A.shape[0] != n:
                raise DimensionError(f"{f.name} has size {A.shape[0]}, expected {n}")
            object.__setattr__(self, f.name, A)
        for name in ("M_mass", "K_E", "D_M", "D_R", "K_g"):
            _check_symmetry(name, getattr(self, name), +1)
        _check_symmetry("D_G", self.D_G, -1)

    @property
    def n(self) -> int:
        return self.M_mass.shape[0]

    @classmethod
    def from_mk(cls, M_mass, K_E) -> "QepParts":
        """Parts with only mass and stiffness; all other terms zero."""
        n = _csr(M_mass).shape[0]
        Z = sp.csr_matrix((n, n))
        return cls(M_mass, K_E, Z, Z, Z, Z, Z)


@dataclass(frozen=True)
class ShiftParams:
    """Angular velocity ``omega``, reference ``omega_ref`` and complex shift."""

    omega: float
    omega_ref: float
    gamma_r: float
    gamma_i: float

    def __post_init__(self):
        if not (self.omega > 0 and self.omega_ref > 0):
            raise ShiftError("omega and omega_ref must be positive")
        if not (math.isfinite(self.gamma_r) and math.isfinite(self.gamma_i)):
            raise ShiftError("shift must be finite")
        if self.gamma_i == 0:
            raise ShiftError("gamma_i must be nonzero")

    @property
    def gamma(self) -> complex:
        return complex(self.gamma_r, self.gamma_i)


def assemble_qep(parts: QepParts, p: ShiftParams) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Return ``(D_Omega, K_Omega)`` for the given angular velocity."""
    ratio = p.omega / p.omega_ref
    D = parts.D_M + (p.omega_ref / p.omega - 1.0) * parts.D_R + ratio * parts.D_G
    K = parts.K_E + parts.K_R + (ratio * ratio - 1.0) * parts.K_g
    return D.tocsr(), K.tocsr()


def companion_pencil(M_mass, D_Omega, K_Omega) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """``A = [[0, I], [-K, -D]]`` and ``B = [[I, 0], [0, M]]``."""
    M, D, K = (_csr(X) for X in (M_mass, D_Omega, K_Omega))
    n = M.shape[0]
    if M.shape != (n, n) or D.shape != (n, n) or K.shape != (n, n):
        raise DimensionError(f"pencil blocks disagree: {M.shape}, {D.shape}, {K.shape}")
    I = sp.identity(n, format="csr")
    A = sp.bmat([[None, I], [-K, -D]], format="csr")
    B = sp.bmat([[I, None], [None, M]], format="csr")
    return A, B


def load_qep(directory) -> QepParts:
    """Read the seven parts from ``<directory>/<name>.mtx`` (or ``.mtx.gz``)."""
    directory = Path(directory)
    mats = {}
    for field_name, stem in QEP_FILE_NAMES.items():
        for suffix in (".mtx", ".mtx.gz"):
            path = directory / f"{stem}{suffix}"
            if path.exists():
                mats[field_name] = load_matrix_market_general(path)
                break
        else:
            raise FileNotFoundError(f"missing QEP part {stem}.mtx in {directory}")
    return QepParts(**mats)
