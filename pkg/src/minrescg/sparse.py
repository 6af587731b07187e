"""Sparse symmetric storage, kernels and Matrix Market I/O.

Matrices keep the full symmetric pattern in CSR form so a product is a single
row sweep. ``nnz`` therefore counts both triangles, which is also how the
SuiteSparse collection reports symmetric matrices.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import os
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionError,
    IndexOutOfRangeError,
    MalformedHeaderError,
    NotSymmetricError,
    UnsupportedFieldError,
)

__all__ = [
    "SparseSymMatrix",
    "matvec",
    "dense_block_apply",
    "load_matrix_market",
    "load_matrix_market_general",
    "save_matrix_market",
]

PathLike = Union[str, os.PathLike]


@dataclass(frozen=True, eq=False)
class SparseSymMatrix:
    """Real symmetric matrix in CSR form with the full pattern stored."""

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _csr: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ro = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        ci = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        va = np.ascontiguousarray(self.values, dtype=np.float64)
        if ro.shape != (self.n + 1,) or ro[0] != 0 or ro[-1] != ci.size or ci.size != va.size:
            raise DimensionError("inconsistent CSR arrays")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        for arr in (ro, ci, va):
            arr.setflags(write=False)
        object.__setattr__(self, "row_offsets", ro)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", va)
        csr = sp.csr_matrix((va, ci, ro), shape=(self.n, self.n))
        object.__setattr__(self, "_csr", csr)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_scipy(cls, M, *, sym_tol: float | None = 0.0) -> "SparseSymMatrix":
        """Build from any scipy sparse matrix or dense array.

        ``sym_tol`` is the allowed asymmetry relative to the Frobenius norm;
        ``None`` skips the check. Exactly symmetric input is stored as is,
        otherwise the matrix is replaced by its symmetric part.
        """
        csr = sp.csr_matrix(M, dtype=np.float64)
        if csr.shape[0] != csr.shape[1]:
            raise DimensionError(f"matrix is not square: {csr.shape}")
        csr.sum_duplicates()
        csr.sort_indices()
        if sym_tol is not None:
            diff = csr - csr.T
            asym = sp.linalg.norm(diff) if diff.nnz else 0.0
            fro = sp.linalg.norm(csr) if csr.nnz else 0.0
            if asym > sym_tol * max(fro, np.finfo(float).tiny):
                raise NotSymmetricError(f"matrix asymmetry {asym:.3e} exceeds {sym_tol:g} * ||A||_F")
            if asym > 0:
                csr = ((csr + csr.T) * 0.5).tocsr()
                csr.sort_indices()
        return cls(csr.shape[0], csr.indptr, csr.indices, csr.data)

    @classmethod
    def identity(cls, n: int) -> "SparseSymMatrix":
        return cls.from_scipy(sp.identity(n, format="csr"))

    # -- views ----------------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def nnz_lower(self) -> int:
        """Stored entries of the lower triangle including the diagonal."""
        rows = np.repeat(np.arange(self.n), np.diff(self.row_offsets))
        return int(np.count_nonzero(self.col_indices <= rows))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def shifted(self, sigma: float) -> "SparseSymMatrix":
        """Return ``A - sigma*I``."""
        if sigma == 0:
            return self
        return SparseSymMatrix.from_scipy(self._csr - sigma * sp.identity(self.n, format="csr"))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        for arr in (self.row_offsets, self.col_indices, self.values):
            h.update(arr.astype("<f8" if arr.dtype.kind == "f" else "<i8").tobytes())
        return h.hexdigest()

    def is_symmetric(self) -> bool:
        """Exact pattern and value symmetry check."""
        t = self._csr.T.tocsr()
        t.sort_indices()
        return (
            np.array_equal(t.indptr, self.row_offsets)
            and np.array_equal(t.indices, self.col_indices)
            and np.array_equal(t.data, self.values)
        )

    def __matmul__(self, x):
        return matvec(self, x)


def matvec(A: SparseSymMatrix, x) -> np.ndarray:
    """y = A x with a fixed left-to-right summation order per row."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise DimensionError(f"vector length {x.shape} does not match n={A.n}")
    return A._csr @ x


def dense_block_apply(V, scale, x) -> np.ndarray:
    """Return ``V @ diag(scale) @ V.T @ x`` using two rank-k products."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    x = np.asarray(x, dtype=np.float64)
    scale = np.atleast_1d(np.asarray(scale, dtype=np.float64))
    if V.shape[0] != x.shape[0] or scale.shape != (V.shape[1],):
        raise DimensionError(f"block {V.shape}, scale {scale.shape} and vector {x.shape} disagree")
    if V.shape[1] == 0:
        return np.zeros_like(x)
    return V @ (scale * (V.T @ x))


# -- Matrix Market ----------------------------------------------------------


def _open_text(path: PathLike):
    path = os.fspath(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="ascii", errors="replace")
    return open(path, "r", encoding="ascii", errors="replace")


def _read_coordinate(path: PathLike, allowed_symmetry: tuple[str, ...]):
    with _open_text(path) as fh:
        header = fh.readline()
        parts = header.strip().split()
        if len(parts) != 5 or parts[0].lower() != "%%matrixmarket" or parts[1].lower() != "matrix":
            raise MalformedHeaderError(f"{path}: not a Matrix Market matrix header: {header.strip()!r}")
        fmt, fieldtype, symmetry = (p.lower() for p in parts[2:])
        if fmt != "coordinate":
            raise MalformedHeaderError(f"{path}: only coordinate format is supported, got {fmt!r}")
        if fieldtype not in ("real", "integer", "double"):
            raise UnsupportedFieldError(f"{path}: field {fieldtype!r} is not real")
        if symmetry not in allowed_symmetry:
            raise NotSymmetricError(f"{path}: symmetry {symmetry!r} not accepted (expected {allowed_symmetry})")
        line = fh.readline()
        while line and (line.startswith("%") or not line.strip()):
            line = fh.readline()
        try:
            nrows, ncols, nent = (int(t) for t in line.split())
        except ValueError:
            raise MalformedHeaderError(f"{path}: bad size line {line.strip()!r}") from None
        body = fh.read()
    lines = [ln for ln in body.splitlines() if ln.strip() and not ln.lstrip().startswith("%")]
    if len(lines) != nent:
        raise MalformedHeaderError(f"{path}: expected {nent} entries, found {len(lines)}")
    if nent:
        try:
            data = np.array(" ".join(lines).split(), dtype=np.float64)
        except ValueError:
            raise MalformedHeaderError(f"{path}: non-numeric entry") from None
        if data.size != 3 * nent:
            raise MalformedHeaderError(f"{path}: each entry needs row, column and value")
        data = data.reshape(nent, 3)
    else:
        data = np.zeros((0, 3))
    rows, cols, vals = data[:, 0], data[:, 1], data[:, 2]
    if np.any(rows != np.floor(rows)) or np.any(cols != np.floor(cols)):
        raise MalformedHeaderError(f"{path}: non-integer index")
    rows = rows.astype(np.int64) - 1
    cols = cols.astype(np.int64) - 1
    if nent and (rows.min() < 0 or cols.min() < 0 or rows.max() >= nrows or cols.max() >= ncols):
        raise IndexOutOfRangeError(f"{path}: index outside {nrows}x{ncols}")
    return nrows, ncols, symmetry, rows, cols, vals


def _assemble_csr(n_rows, n_cols, rows, cols, vals):
    """CSR assembly that keeps explicit zeros and sums duplicates."""
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        key = rows * n_cols + cols
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        vals = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols, vals


def load_matrix_market(path: PathLike) -> SparseSymMatrix:
    """Read a real symmetric coordinate Matrix Market file (optionally gzipped)."""
    n, m, _, rows, cols, vals = _read_coordinate(path, ("symmetric",))
    if n != m:
        raise MalformedHeaderError(f"{path}: symmetric matrix must be square, got {n}x{m}")
    lo_r = np.maximum(rows, cols)
    lo_c = np.minimum(rows, cols)
    off = lo_r != lo_c
    r = np.concatenate([lo_r, lo_c[off]])
    c = np.concatenate([lo_c, lo_r[off]])
    v = np.concatenate([vals, vals[off]])
    indptr, indices, data = _assemble_csr(n, n, r, c, v)
    return SparseSymMatrix(n, indptr, indices, data)


def load_matrix_market_general(path: PathLike) -> sp.csr_matrix:
    """Read a general, symmetric or skew-symmetric real coordinate file."""
    n, m, symmetry, rows, cols, vals = _read_coordinate(path, ("general", "symmetric", "skew-symmetric"))
    if symmetry != "general":
        sign = 1.0 if symmetry == "symmetric" else -1.0
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, sign * vals[off]]),
        )
    indptr, indices, data = _assemble_csr(n, m, rows, cols, vals)
    return sp.csr_matrix((data, indices, indptr), shape=(n, m))


def save_matrix_market(A, path: PathLike, *, symmetry: str | None = None) -> None:
    """Write ``A`` in coordinate format with round-trip exact values.

    A :class:`SparseSymMatrix` is written as ``symmetric`` (lower triangle);
    scipy matrices default to ``general``.
    """
    if isinstance(A, SparseSymMatrix):
        coo = A.to_scipy().tocoo()
        symmetry = symmetry or "symmetric"
    else:
        coo = sp.coo_matrix(A)
        symmetry = symmetry or "general"
    r, c, v = coo.row, coo.col, coo.data
    if symmetry == "symmetric":
        keep = r >= c
    elif symmetry == "skew-symmetric":
        keep = r > c
    else:
        keep = np.ones(r.size, dtype=bool)
    r, c, v = r[keep], c[keep], v[keep]
    order = np.lexsort((r, c))
    r, c, v = r[order], c[order], v[order]
    opener = gzip.open if os.fspath(path).endswith(".gz") else open
    with opener(path, "wt") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {symmetry}\n")
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {r.size}\n")
        for i, j, x in zip(r, c, v):
            fh.write(f"{i + 1} {j + 1} {float(x)!r}\n")
