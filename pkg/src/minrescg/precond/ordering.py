"""Symmetric fill-reducing orderings and diagonal equilibration."""

from __future__ import annotations

import heapq

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

__all__ = ["minimum_degree", "symmetric_ordering", "equilibration_scaling"]


def minimum_degree(A: sp.spmatrix) -> np.ndarray:
    """Greedy minimum degree on the elimination graph of ``A``.

    Ties go to the lowest index. Eliminating a node turns its neighbours into
    a clique, so the result tracks fill of a complete factorization.
    """
    csr = sp.csr_matrix(A)
    n = csr.shape[0]
    adj = [set(csr.indices[csr.indptr[i]:csr.indptr[i + 1]].tolist()) - {i} for i in range(n)]
    heap = [(len(adj[i]), i) for i in range(n)]
    heapq.heapify(heap)
    done = np.zeros(n, dtype=bool)
    order = []
    while heap:
        deg, v = heapq.heappop(heap)
        if done[v] or deg != len(adj[v]):
            continue
        done[v] = True
        order.append(v)
        nbrs = adj[v]
        for u in nbrs:
            adj[u].discard(v)
        for u in nbrs:
            adj[u] |= nbrs
            adj[u].discard(u)
            heapq.heappush(heap, (len(adj[u]), u))
        adj[v] = set()
    return np.asarray(order, dtype=np.int64)


def symmetric_ordering(A: sp.spmatrix, method: str = "mindeg") -> np.ndarray:
    n = A.shape[0]
    if method in (None, "natural", "none"):
        return np.arange(n, dtype=np.int64)
    if method == "mindeg":
        return minimum_degree(A)
    if method == "rcm":
        return np.asarray(reverse_cuthill_mckee(sp.csr_matrix(A), symmetric_mode=True), dtype=np.int64)
    raise ValueError(f"unknown ordering {method!r}")


def equilibration_scaling(A: sp.spmatrix) -> np.ndarray:
    """Diagonal ``s`` with ``max_j |s_i a_ij s_j|`` close to one.

    One sweep of symmetric max-norm scaling; rows without entries get 1.
    """
    csr = sp.csr_matrix(A)
    rowmax = np.asarray(abs(csr).max(axis=1).todense()).ravel()
    s = np.ones(csr.shape[0])
    nz = rowmax > 0
    s[nz] = 1.0 / np.sqrt(rowmax[nz])
    return s
