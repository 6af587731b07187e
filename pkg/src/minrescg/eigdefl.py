"""Negative eigenpairs of a symmetric matrix, used as the deflation basis.

Small matrices go through a dense symmetric eigendecomposition. Larger ones
use ARPACK (through scipy) in growing batches of the algebraically smallest
eigenvalues until a nonnegative one shows up, which proves every negative
eigenvalue has been captured.
"""

from __future__ import annotations

import hashlib
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EigensolverError, NumericallySingularError
from .sparse import SparseSymMatrix

__all__ = [
    "DeflationBasis",
    "EigConfig",
    "negative_eigenpairs",
    "inertia_count",
    "save_basis",
    "load_basis",
    "cached_negative_eigenpairs",
]

log = logging.getLogger(__name__)

DEFAULT_SEED = 0x5EED
_CACHE_MAGIC = b"MRCGDEFL"
_CACHE_VERSION = 1


@dataclass(frozen=True, eq=False)
class DeflationBasis:
    """Orthonormal ``V`` (n x k) spanning the negative invariant subspace, with eigenvalues."""

    V: np.ndarray
    lam: np.ndarray
    residual_norms: np.ndarray

    def __post_init__(self):
        V = np.asfortranarray(np.asarray(self.V, dtype=np.float64))
        if V.ndim == 1:
            V = V[:, None]
        lam = np.atleast_1d(np.asarray(self.lam, dtype=np.float64))
        res = np.atleast_1d(np.asarray(self.residual_norms, dtype=np.float64))
        if lam.shape != (V.shape[1],) or res.shape != lam.shape:
            raise ValueError(f"basis shape {V.shape} does not match {lam.shape} eigenvalues")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "residual_norms", res)

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def k(self) -> int:
        return self.V.shape[1]

    @classmethod
    def empty(cls, n: int) -> "DeflationBasis":
        return cls(np.zeros((n, 0)), np.zeros(0), np.zeros(0))

    @classmethod
    def from_pairs(cls, A, V, lam) -> "DeflationBasis":
        """Wrap given eigenpairs, computing their residual norms against ``A``."""
        V = np.asarray(V, dtype=np.float64)
        if V.ndim == 1:
            V = V[:, None]
        lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
        R = _apply(A, V) - V * lam
        return cls(V, lam, np.linalg.norm(R, axis=0))

    def orthonormality_error(self) -> float:
        return float(np.linalg.norm(self.V.T @ self.V - np.eye(self.k)))


@dataclass(frozen=True)
class EigConfig:
    eig_tol: float = 1e-8
    max_lanczos_dim: int | None = None
    dense_threshold: int = 2000
    k_hint: int | None = None
    seed: int = DEFAULT_SEED
    max_restarts: int = 8

    def __post_init__(self):
        if not self.eig_tol > 0:
            raise ValueError("eig_tol must be positive")
        if self.dense_threshold < 1:
            raise ValueError("dense_threshold must be >= 1")


def _apply(A, V):
    if isinstance(A, SparseSymMatrix):
        return A.to_scipy() @ V
    return A @ V


def _as_scipy(A):
    if isinstance(A, SparseSymMatrix):
        return A.to_scipy()
    if sp.issparse(A):
        return A.tocsr()
    return np.asarray(A, dtype=np.float64)


def _fro(A) -> float:
    if isinstance(A, SparseSymMatrix):
        return A.frobenius_norm()
    if sp.issparse(A):
        return float(sp.linalg.norm(A))
    return float(np.linalg.norm(A))


def negative_eigenpairs(A, cfg: EigConfig | None = None) -> DeflationBasis:
    """All eigenpairs of symmetric ``A`` with negative eigenvalue.

    Raises :class:`NumericallySingularError` if an eigenvalue lies within
    ``eig_tol * ||A||_F`` of zero, and :class:`EigensolverError` (carrying
    the partial basis) if the iterative path does not converge.
    """
    cfg = cfg or EigConfig()
    M = _as_scipy(A)
    n = M.shape[0]
    fro = _fro(A)
    zero_tol = cfg.eig_tol * fro
    if n <= cfg.dense_threshold:
        dense = M.toarray() if sp.issparse(M) else M
        w, Q = np.linalg.eigh(dense)
        if np.any(np.abs(w) <= zero_tol):
            raise NumericallySingularError(
                f"eigenvalue {w[np.argmin(np.abs(w))]:.3e} within {zero_tol:.3e} of zero"
            )
        neg = w < 0
        basis = DeflationBasis.from_pairs(M, Q[:, neg], w[neg])
    else:
        basis = _negative_eigenpairs_arpack(M, cfg, zero_tol)
    _check_residuals(basis, cfg)
    return basis


def _check_residuals(basis: DeflationBasis, cfg: EigConfig) -> None:
    bad = basis.residual_norms > cfg.eig_tol * np.abs(basis.lam)
    if np.any(bad):
        raise EigensolverError(
            f"{int(bad.sum())} eigenpairs miss the residual tolerance {cfg.eig_tol:g}", partial=basis
        )


def _rayleigh_ritz(M, V):
    Q, _ = np.linalg.qr(V)
    H = Q.T @ (M @ Q)
    H = 0.5 * (H + H.T)
    w, Y = np.linalg.eigh(H)
    return w, Q @ Y


def _negative_eigenpairs_arpack(M, cfg: EigConfig, zero_tol: float) -> DeflationBasis:
    n = M.shape[0]
    rng = np.random.default_rng(cfg.seed)
    v0 = rng.uniform(-1.0, 1.0, n)
    batch = max(8, 2 * (cfg.k_hint or 0) + 8)
    found_w = found_V = None
    for _ in range(cfg.max_restarts):
        nev = min(batch, n - 2)
        ncv = cfg.max_lanczos_dim or min(n - 1, max(2 * nev + 1, 20))
        ncv = max(ncv, nev + 2)
        try:
            w, V = spla.eigsh(M, k=nev, which="SA", v0=v0, ncv=ncv, tol=cfg.eig_tol * 1e-2, maxiter=n * 10)
        except spla.ArpackNoConvergence as exc:
            partial = None
            if exc.eigenvalues is not None and exc.eigenvalues.size:
                neg = exc.eigenvalues < 0
                partial = DeflationBasis.from_pairs(M, exc.eigenvectors[:, neg], exc.eigenvalues[neg])
            raise EigensolverError(f"ARPACK did not converge for {nev} eigenpairs", partial=partial) from exc
        w, V = _rayleigh_ritz(M, V)
        found_w, found_V = w, V
        if np.any(w >= 0) or nev >= n - 2:
            break
        log.debug("all %d computed eigenvalues negative; enlarging batch", nev)
        batch *= 2
    else:
        neg = found_w < 0
        raise EigensolverError(
            "could not bracket the negative spectrum",
            partial=DeflationBasis.from_pairs(M, found_V[:, neg], found_w[neg]),
        )
    nonneg = found_w[found_w >= 0]
    near = np.abs(found_w) <= zero_tol
    if np.any(near):
        raise NumericallySingularError(f"eigenvalue within {zero_tol:.3e} of zero")
    if nonneg.size == 0 and nev < n - 2:
        raise EigensolverError("negative spectrum not bracketed", partial=None)
    neg = found_w < 0
    return DeflationBasis.from_pairs(M, found_V[:, neg], found_w[neg])


def inertia_count(F) -> tuple[int, int, int]:
    """(negative, zero, positive) eigenvalue counts of the block diagonal of ``F``.

    Only meaningful for a complete factorization, where Sylvester's law makes
    these the inertia of the factored matrix.
    """
    neg = zero = pos = 0
    for b in F.D_blocks:
        if len(b) == 1:
            eigs = (b[0],)
        elif len(b) == 3:
            a, c, d = b
            mean = 0.5 * (a + d)
            rad = np.hypot(0.5 * (a - d), c)
            eigs = (mean + rad, mean - rad)
        else:
            raise ValueError(f"malformed D block {b!r}")
        for e in eigs:
            if e < 0:
                neg += 1
            elif e > 0:
                pos += 1
            else:
                zero += 1
    return neg, zero, pos


# -- on-disk cache -----------------------------------------------------------
# layout: magic(8) version(<i8) n(<i8) k(<i8) eig_tol(<f8) lam(k <f8) res(k <f8) V(n*k <f8, column-major)


def save_basis(basis: DeflationBasis, path, eig_tol: float) -> None:
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<qqqd", _CACHE_VERSION, basis.n, basis.k, eig_tol))
        fh.write(basis.lam.astype("<f8").tobytes())
        fh.write(basis.residual_norms.astype("<f8").tobytes())
        fh.write(np.asarray(basis.V, dtype="<f8").tobytes(order="F"))


def load_basis(path) -> tuple[DeflationBasis, float]:
    with open(path, "rb") as fh:
        if fh.read(8) != _CACHE_MAGIC:
            raise ValueError(f"{path}: not a deflation basis file")
        version, n, k, eig_tol = struct.unpack("<qqqd", fh.read(32))
        if version != _CACHE_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        lam = np.frombuffer(fh.read(8 * k), dtype="<f8").copy()
        res = np.frombuffer(fh.read(8 * k), dtype="<f8").copy()
        V = np.frombuffer(fh.read(8 * n * k), dtype="<f8").reshape((n, k), order="F").copy()
    return DeflationBasis(V, lam, res), eig_tol


def cache_key(A: SparseSymMatrix, eig_tol: float) -> str:
    h = hashlib.sha256(A.content_hash().encode())
    h.update(struct.pack("<d", eig_tol))
    return h.hexdigest()[:32]


def cached_negative_eigenpairs(A: SparseSymMatrix, cfg: EigConfig | None = None, cache_dir=None) -> DeflationBasis:
    """:func:`negative_eigenpairs` memoized on disk by matrix content and tolerance."""
    cfg = cfg or EigConfig()
    if cache_dir is None:
        return negative_eigenpairs(A, cfg)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{cache_key(A, cfg.eig_tol)}.defl"
    if path.exists():
        basis, _ = load_basis(path)
        if basis.n == A.n:
            return basis
    basis = negative_eigenpairs(A, cfg)
    tmp = path.with_suffix(f".tmp{os.getpid()}")
    save_basis(basis, tmp, cfg.eig_tol)
    os.replace(tmp, path)
    return basis
