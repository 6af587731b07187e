"""Incomplete block LDL^T with Bunch-Kaufman pivoting, and the SPD modification of D."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..errors import FactorizationBreakdown, SingularBlockError
from ..sparse import SparseSymMatrix
from . import _kernels
from .base import PreconditionerAction
from .ordering import equilibration_scaling, symmetric_ordering

__all__ = ["BlockLDLFactors", "ildlt", "modify_block_diagonal", "positivize_block"]

_BK_ALPHA = (1.0 + math.sqrt(17.0)) / 8.0


@dataclass(frozen=True, eq=False)
class BlockLDLFactors:
    """``P S A S P^T ~ L D L^T``.

    ``perm[i]`` is the original index placed at position ``i``; ``scale`` is
    the diagonal of ``S`` (``None`` means no scaling). ``D_blocks`` holds
    ``(d,)`` for 1x1 pivots and ``(alpha, beta, gamma)`` for 2x2 pivots, in
    elimination order.
    """

    perm: np.ndarray
    L_strict: sp.csr_matrix
    D_blocks: tuple
    fill_level: int | None
    drop_tol: float
    is_complete: bool
    scale: np.ndarray | None = None
    label: str = "ildlt"

    @property
    def n(self) -> int:
        return int(self.perm.size)

    @property
    def L(self) -> sp.csr_matrix:
        return (self.L_strict + sp.identity(self.n, format="csr")).tocsr()

    @property
    def nnz_per_row(self) -> float:
        """Stored entries of ``L`` (with unit diagonal) plus ``D``, per row."""
        d = sum(1 if len(b) == 1 else 4 for b in self.D_blocks)
        return (self.L_strict.nnz + self.n + d) / max(self.n, 1)

    def block_sizes(self) -> list[int]:
        return [1 if len(b) == 1 else 2 for b in self.D_blocks]

    def D(self) -> sp.csr_matrix:
        return _blocks_to_sparse(self.D_blocks, inverse=False)

    def reconstruct(self) -> np.ndarray:
        """Dense ``A`` implied by the factors (test helper, small n only)."""
        L = self.L.toarray()
        B = L @ self.D().toarray() @ L.T
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.n)
        B = B[np.ix_(inv, inv)]
        if self.scale is not None:
            B = B / np.outer(self.scale, self.scale)
        return B

    def solve(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64)
        v = g * self.scale if self.scale is not None else g
        v = np.ascontiguousarray(v[self.perm])
        Ls = self.L_strict
        v = _kernels.solve_lower_unit(Ls.indptr, Ls.indices, Ls.data, v)
        v = self._Dinv @ v
        Lt = self._Lt
        v = _kernels.solve_upper(Lt.indptr, Lt.indices, Lt.data, v, True)
        out = np.empty_like(v)
        out[self.perm] = v
        if self.scale is not None:
            out *= self.scale
        return out

    def action(self) -> PreconditionerAction:
        return PreconditionerAction(self.solve, self.label)

    @property
    def _Dinv(self) -> sp.csr_matrix:
        cached = self.__dict__.get("_dinv_cache")
        if cached is None:
            cached = _blocks_to_sparse(self.D_blocks, inverse=True)
            object.__setattr__(self, "_dinv_cache", cached)
        return cached

    @property
    def _Lt(self) -> sp.csr_matrix:
        cached = self.__dict__.get("_lt_cache")
        if cached is None:
            cached = self.L_strict.T.tocsr()
            cached.sort_indices()
            object.__setattr__(self, "_lt_cache", cached)
        return cached


def _blocks_to_sparse(blocks: Sequence[tuple], inverse: bool) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    i = 0
    for b in blocks:
        if len(b) == 1:
            rows.append(i)
            cols.append(i)
            vals.append(1.0 / b[0] if inverse else b[0])
            i += 1
        else:
            a, bt, c = b
            if inverse:
                det = a * c - bt * bt
                a, bt, c = c / det, -bt / det, a / det
            rows += [i, i, i + 1, i + 1]
            cols += [i, i + 1, i, i + 1]
            vals += [a, bt, bt, c]
            i += 2
    return sp.csr_matrix((vals, (rows, cols)), shape=(i, i))


def ildlt(
    A,
    fill_level: int | None = 1,
    drop_tol: float = 1e-2,
    *,
    ordering: str = "mindeg",
    equilibrate: bool = True,
) -> BlockLDLFactors:
    """Incomplete ``LDL^T`` with 1x1/2x2 Bunch-Kaufman pivots.

    Fill is first limited structurally (an update creating entry ``(i, j)``
    through pivot ``p`` has level ``lev(i,p) + lev(p,j) + 1`` and is kept only
    if it does not exceed ``fill_level``), then entries of each new column of
    ``L`` below ``drop_tol`` times the 2-norm of the active pivot column are
    dropped. ``fill_level=None`` (or ``>= n``) with ``drop_tol=0`` gives a
    complete factorization.
    """
    csr = A.to_scipy() if isinstance(A, SparseSymMatrix) else sp.csr_matrix(A, dtype=np.float64)
    n = csr.shape[0]
    if fill_level is not None and fill_level >= n:
        fill_level = None
    scale = equilibration_scaling(csr) if equilibrate else None
    if scale is not None:
        csr = sp.diags(scale) @ csr @ sp.diags(scale)
        csr = sp.csr_matrix(csr)
    preorder = symmetric_ordering(csr, ordering)

    diag = np.zeros(n)
    adj: list[dict[int, float]] = [dict() for _ in range(n)]
    lev: list[dict[int, int]] = [dict() for _ in range(n)]
    coo = csr.tocoo()
    for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
        if i == j:
            diag[i] += v
        else:
            adj[i][j] = adj[i].get(j, 0.0) + v
            lev[i][j] = 0
    fro = float(np.sqrt(np.sum(coo.data ** 2)))
    small = 1e-14 * fro

    eliminated = np.zeros(n, dtype=bool)
    perm: list[int] = []
    blocks: list[tuple] = []
    lcols: list[tuple[int, dict[int, float]]] = []
    ptr = 0

    def argmax_abs(d: dict[int, float]):
        best_j, best_v = -1, 0.0
        for j, v in d.items():
            av = abs(v)
            if av > best_v or (av == best_v and av > 0 and j < best_j):
                best_j, best_v = j, av
        return best_j, best_v

    def detach(p: int) -> dict[int, float]:
        col = adj[p]
        for j in col:
            del adj[j][p]
            lev[j].pop(p, None)
        adj[p] = {}
        return col

    def schur_update(entries: dict[int, tuple], coupling):
        # entries: j -> kept pivot-column values; coupling(u, w) is the rank-1/2 update
        keys = sorted(entries)
        for a_idx, i in enumerate(keys):
            ui = entries[i]
            diag[i] -= coupling(ui, ui)
            for j in keys[a_idx + 1:]:
                uj = entries[j]
                delta = coupling(ui, uj)
                if j in adj[i]:
                    adj[i][j] -= delta
                    adj[j][i] -= delta
                    continue
                level = min(
                    (plev_i + plev_j + 1
                     for plev_i in (pl[i] for pl in pivot_levels if i in pl)
                     for plev_j in (pl[j] for pl in pivot_levels if j in pl)),
                    default=None,
                )
                if level is None or (fill_level is not None and level > fill_level):
                    continue
                adj[i][j] = -delta
                adj[j][i] = -delta
                lev[i][j] = level
                lev[j][i] = level

    while len(perm) < n:
        while eliminated[preorder[ptr]]:
            ptr += 1
        k = int(preorder[ptr])
        akk = diag[k]
        r, colmax = argmax_abs(adj[k])
        if colmax <= small and abs(akk) <= small:
            raise FactorizationBreakdown(
                f"ILDLT breakdown at original index {k}: pivot and column both below {small:.3e}"
            )
        two_by_two = False
        p = k
        if abs(akk) < _BK_ALPHA * colmax:
            _, rowmax = argmax_abs(adj[r])
            if abs(akk) * rowmax >= _BK_ALPHA * colmax * colmax:
                p = k
            elif abs(diag[r]) >= _BK_ALPHA * rowmax:
                p = r
            else:
                two_by_two = True

        if not two_by_two:
            d = diag[p]
            if abs(d) <= small:
                raise FactorizationBreakdown(f"ILDLT breakdown: 1x1 pivot {d:.3e} at original index {p}")
            pivot_levels = [dict(lev[p])]
            col = detach(p)
            cnorm = math.sqrt(d * d + sum(v * v for v in col.values()))
            kept = {j: v for j, v in col.items() if abs(v) >= drop_tol * cnorm}
            schur_update({j: (v,) for j, v in kept.items()}, lambda u, w: u[0] * w[0] / d)
            lcols.append((p, {j: v / d for j, v in kept.items()}))
            blocks.append((float(d),))
            perm.append(p)
            eliminated[p] = True
        else:
            q = r
            a, b, c = diag[k], adj[k][q], diag[q]
            det = a * c - b * b
            if abs(det) <= small * max(abs(a), abs(b), abs(c)):
                raise FactorizationBreakdown(f"ILDLT breakdown: singular 2x2 pivot at ({k}, {q})")
            ia, ib, ic = c / det, -b / det, a / det
            pivot_levels = [dict(lev[k]), dict(lev[q])]
            pivot_levels[0].pop(q, None)
            pivot_levels[1].pop(k, None)
            colk = detach(k)
            colq = detach(q)
            colk.pop(q, None)
            colq.pop(k, None)
            nk = math.sqrt(a * a + b * b + sum(v * v for v in colk.values()))
            nq = math.sqrt(b * b + c * c + sum(v * v for v in colq.values()))
            entries = {}
            for j in set(colk) | set(colq):
                vk = colk.get(j, 0.0)
                vq = colq.get(j, 0.0)
                if abs(vk) < drop_tol * nk:
                    vk = 0.0
                if abs(vq) < drop_tol * nq:
                    vq = 0.0
                if vk != 0.0 or vq != 0.0:
                    entries[j] = (vk, vq)

            def coupling(u, w):
                return u[0] * (ia * w[0] + ib * w[1]) + u[1] * (ib * w[0] + ic * w[1])

            schur_update(entries, coupling)
            lk, lq = {}, {}
            for j, (vk, vq) in entries.items():
                lk[j] = vk * ia + vq * ib
                lq[j] = vk * ib + vq * ic
            lcols.append((k, lk))
            lcols.append((q, lq))
            blocks.append((float(a), float(b), float(c)))
            perm.extend([k, q])
            eliminated[k] = eliminated[q] = True

    perm_arr = np.asarray(perm, dtype=np.int64)
    pos = np.empty(n, dtype=np.int64)
    pos[perm_arr] = np.arange(n)
    rows, cols, vals = [], [], []
    for p, col in lcols:
        cp = pos[p]
        for j, v in col.items():
            rows.append(pos[j])
            cols.append(cp)
            vals.append(v)
    L = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    L.sort_indices()
    complete = fill_level is None and drop_tol == 0
    if complete:
        label = "ldlt"
    else:
        label = f"ildlt({fill_level},{drop_tol:g})"
    return BlockLDLFactors(perm_arr, L, tuple(blocks), fill_level, float(drop_tol), complete, scale, label)


def positivize_block(alpha: float, beta: float, gamma: float, tol: float = 0.0) -> tuple[float, float, float]:
    """Replace a symmetric 2x2 block by the one with absolute eigenvalues.

    The block is written as ``Q diag(l1, l2) Q`` with the symmetric reflector
    ``Q = [[c, s], [s, -c]]``, ``c^2 + s^2 = 1``, and recomposed with
    ``|l1|, |l2|``.
    """
    half_diff = 0.5 * (alpha - gamma)
    radius = math.hypot(half_diff, beta)
    mean = 0.5 * (alpha + gamma)
    l1, l2 = mean + radius, mean - radius
    if radius == 0.0:
        c, s = 1.0, 0.0
    else:
        # eigenvector of l1: (beta, l1 - alpha) or (l1 - gamma, beta), take the larger
        v1 = (beta, l1 - alpha)
        v2 = (l1 - gamma, beta)
        vx, vy = v1 if math.hypot(*v1) >= math.hypot(*v2) else v2
        nrm = math.hypot(vx, vy)
        c, s = vx / nrm, vy / nrm
    if min(abs(l1), abs(l2)) <= tol:
        raise SingularBlockError(f"cannot positivize singular block (eigenvalues {l1:.3e}, {l2:.3e})")
    a1, a2 = abs(l1), abs(l2)
    return (
        c * c * a1 + s * s * a2,
        c * s * (a1 - a2),
        s * s * a1 + c * c * a2,
    )


def modify_block_diagonal(F: BlockLDLFactors) -> BlockLDLFactors:
    """SPD variant ``L |D| L^T``: every block of ``D`` gets its absolute eigenvalues."""
    dmax = 0.0
    for b in F.D_blocks:
        dmax = max(dmax, max(abs(x) for x in b))
    tol = 1e-14 * dmax
    new_blocks = []
    for b in F.D_blocks:
        if len(b) == 1:
            if abs(b[0]) <= tol:
                raise SingularBlockError(f"cannot positivize singular block ({b[0]:.3e})")
            new_blocks.append((abs(b[0]),))
        else:
            new_blocks.append(positivize_block(*b, tol=tol))
    label = F.label.replace("ldlt", "ldlt-mod", 1)
    return replace(F, D_blocks=tuple(new_blocks), label=label)
