"""Compiled kernels for incomplete LU factorization and triangular solves.

All kernels take CSR arrays with sorted column indices. Error conditions are
reported through an integer return code (the offending row, or -1) because
raising from nopython code loses the row number.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def ilu0_kernel(n, indptr, indices, data):
    a = data.copy()
    diag = np.full(n, -1, np.int64)
    iw = np.full(n, -1, np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            iw[indices[p]] = p
        for p in range(indptr[i], indptr[i + 1]):
            k = indices[p]
            if k >= i:
                break
            dk = diag[k]
            a[p] /= a[dk]
            lik = a[p]
            for q in range(dk + 1, indptr[k + 1]):
                w = iw[indices[q]]
                if w >= 0:
                    a[w] -= lik * a[q]
        d = iw[i]
        for p in range(indptr[i], indptr[i + 1]):
            iw[indices[p]] = -1
        if d < 0 or a[d] == 0.0 or not np.isfinite(a[d]):
            return a, diag, i
        diag[i] = d
    return a, diag, -1


@njit(cache=True)
def _heap_push(heap, size, v):
    i = size
    heap[i] = v
    while i > 0:
        parent = (i - 1) // 2
        if heap[parent] <= heap[i]:
            break
        heap[parent], heap[i] = heap[i], heap[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(heap, size):
    top = heap[0]
    size -= 1
    heap[0] = heap[size]
    i = 0
    while True:
        lft = 2 * i + 1
        rgt = lft + 1
        m = i
        if lft < size and heap[lft] < heap[m]:
            m = lft
        if rgt < size and heap[rgt] < heap[m]:
            m = rgt
        if m == i:
            break
        heap[m], heap[i] = heap[i], heap[m]
        i = m
    return top, size


@njit(cache=True)
def ilut_kernel(n, indptr, indices, data, tau, modified):
    """Row-wise threshold ILU; dropped mass is lumped on the diagonal if ``modified``."""
    cap_l = max(16, indptr[n])
    cap_u = max(16, indptr[n])
    Lp = np.zeros(n + 1, np.int64)
    Li = np.empty(cap_l, np.int64)
    Lx = np.empty(cap_l, np.float64)
    Up = np.zeros(n + 1, np.int64)
    Ui = np.empty(cap_u, np.int64)
    Ux = np.empty(cap_u, np.float64)
    nl = 0
    nu = 0

    w = np.zeros(n)
    marker = np.full(n, -1, np.int64)
    nzlist = np.empty(n, np.int64)
    heap = np.empty(n, np.int64)

    for i in range(n):
        nz = 0
        hsize = 0
        norm = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            w[j] = data[p]
            marker[j] = i
            nzlist[nz] = j
            nz += 1
            norm += data[p] * data[p]
            if j < i:
                hsize = _heap_push(heap, hsize, j)
        thresh = tau * np.sqrt(norm)
        lump = 0.0
        while hsize > 0:
            k, hsize = _heap_pop(heap, hsize)
            ukk = Ux[Up[k]]
            lik = w[k] / ukk
            if abs(lik) < thresh:
                lump += w[k]
                w[k] = 0.0
                continue
            w[k] = 0.0
            if nl >= cap_l:
                cap_l *= 2
                Li2 = np.empty(cap_l, np.int64)
                Lx2 = np.empty(cap_l, np.float64)
                Li2[:nl] = Li[:nl]
                Lx2[:nl] = Lx[:nl]
                Li = Li2
                Lx = Lx2
            Li[nl] = k
            Lx[nl] = lik
            nl += 1
            for q in range(Up[k] + 1, Up[k + 1]):
                j = Ui[q]
                if marker[j] != i:
                    marker[j] = i
                    w[j] = 0.0
                    nzlist[nz] = j
                    nz += 1
                    if j < i:
                        hsize = _heap_push(heap, hsize, j)
                w[j] -= lik * Ux[q]
        Lp[i + 1] = nl

        diag = w[i] if marker[i] == i else 0.0
        upper = np.empty(nz, np.int64)
        nup = 0
        for t in range(nz):
            j = nzlist[t]
            if j > i:
                if abs(w[j]) < thresh:
                    lump += w[j]
                else:
                    upper[nup] = j
                    nup += 1
        if modified:
            diag += lump
        if diag == 0.0 or not np.isfinite(diag):
            return Lp, Li[:nl], Lx[:nl], Up, Ui[:nu], Ux[:nu], i
        upper = np.sort(upper[:nup])
        if nu + nup + 1 > cap_u:
            cap_u = max(2 * cap_u, nu + nup + 1)
            Ui2 = np.empty(cap_u, np.int64)
            Ux2 = np.empty(cap_u, np.float64)
            Ui2[:nu] = Ui[:nu]
            Ux2[:nu] = Ux[:nu]
            Ui = Ui2
            Ux = Ux2
        Ui[nu] = i
        Ux[nu] = diag
        nu += 1
        for t in range(nup):
            Ui[nu] = upper[t]
            Ux[nu] = w[upper[t]]
            nu += 1
        Up[i + 1] = nu
        for t in range(nz):
            w[nzlist[t]] = 0.0
    return Lp, Li[:nl], Lx[:nl], Up, Ui[:nu], Ux[:nu], -1


@njit(cache=True)
def solve_lower_unit(indptr, indices, data, b):
    """Forward substitution with an implicit unit diagonal (strict lower CSR)."""
    n = b.shape[0]
    x = b.copy()
    for i in range(n):
        s = x[i]
        for p in range(indptr[i], indptr[i + 1]):
            s -= data[p] * x[indices[p]]
        x[i] = s
    return x


@njit(cache=True)
def solve_upper(indptr, indices, data, b, unit):
    """Backward substitution on upper CSR.

    With ``unit`` the rows hold only strictly upper entries; otherwise the
    diagonal is the first stored entry of each row.
    """
    n = b.shape[0]
    x = b.copy()
    for i in range(n - 1, -1, -1):
        start = indptr[i]
        end = indptr[i + 1]
        s = x[i]
        if unit:
            for p in range(start, end):
                s -= data[p] * x[indices[p]]
            x[i] = s
        else:
            for p in range(start + 1, end):
                s -= data[p] * x[indices[p]]
            x[i] = s / data[start]
    return x
