"""Synthetic brake-like QEP instances.

The industrial matrices are not public. The generator builds a stiffness
``K_E`` from a 2D Laplacian and a diagonally dominant mass matrix, scaled so
that ``K_E - |gamma_max|^2 M`` has a chosen number of negative eigenvalues,
plus small random damping, gyroscopic and stiffness corrections.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .qep import QepParts

__all__ = ["laplacian_2d", "mass_matrix_2d", "synthetic_qep"]

DEFAULT_GAMMA_MAX = complex(1000.0, 20000.0)


def laplacian_2d(nx: int, ny: int | None = None) -> sp.csr_matrix:
    ny = nx if ny is None else ny
    Tx = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nx, nx))
    Ty = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(ny, ny))
    return (sp.kron(sp.identity(ny), Tx) + sp.kron(Ty, sp.identity(nx))).tocsr()


def mass_matrix_2d(nx: int, ny: int | None = None) -> sp.csr_matrix:
    """Consistent-mass-like stencil: 4 on the diagonal, 1/2 to grid neighbours."""
    ny = nx if ny is None else ny
    Tx = sp.diags([0.5, 2.0, 0.5], [-1, 0, 1], shape=(nx, nx))
    Ty = sp.diags([0.5, 2.0, 0.5], [-1, 0, 1], shape=(ny, ny))
    return ((sp.kron(sp.identity(ny), Tx) + sp.kron(Ty, sp.identity(nx))) / 36.0).tocsr()


def _smallest_gen_eigs(K, M, count):
    n = K.shape[0]
    if n <= 1500:
        return sla.eigh(K.toarray(), M.toarray(), eigvals_only=True, subset_by_index=[0, min(count, n) - 1])
    vals = spla.eigsh(K.tocsc(), k=count, M=M.tocsc(), sigma=0.0, which="LM", return_eigenvectors=False)
    return np.sort(vals)


def _random_sym(n, density, rng):
    R = sp.random(n, n, density=density, random_state=rng, data_rvs=lambda s: rng.uniform(-1, 1, s))
    return (R + R.T).tocsr()


def synthetic_qep(
    nx: int,
    ny: int | None = None,
    *,
    target_negatives: int = 6,
    gamma_max: complex = DEFAULT_GAMMA_MAX,
    perturbation: float = 1e-3,
    seed: int = 0,
) -> QepParts:
    """Brake-like parts on an ``nx`` by ``ny`` grid.

    ``K_E`` is scaled so exactly ``target_negatives`` generalized eigenvalues
    of ``(K_E, M)`` lie below ``|gamma_max|^2``. The remaining parts are
    random with Frobenius norms ``perturbation`` times the natural scale of
    their term (``|gamma_max| ||M||`` for damping, ``||K_E||`` for stiffness).
    """
    ny = nx if ny is None else ny
    n = nx * ny
    if not 0 < target_negatives < n:
        raise ValueError("target_negatives must be between 1 and n - 1")
    rng = np.random.default_rng(seed)
    L = laplacian_2d(nx, ny)
    M = mass_matrix_2d(nx, ny)
    lam = _smallest_gen_eigs(L, M, target_negatives + 1)
    split = 0.5 * (lam[target_negatives - 1] + lam[target_negatives])
    K_E = (abs(gamma_max) ** 2 / split) * L

    def scaled(X, scale):
        nrm = sp.linalg.norm(X)
        return (X * (perturbation * scale / nrm)).tocsr() if nrm > 0 else X

    density = min(1.0, 4.0 / n)
    mnorm = sp.linalg.norm(M)
    knorm = sp.linalg.norm(K_E)
    damp = abs(gamma_max) * mnorm
    D_M = scaled(_random_sym(n, density, rng), damp)
    D_R = scaled(_random_sym(n, density, rng), damp)
    G = sp.random(n, n, density=density, random_state=rng, data_rvs=lambda s: rng.uniform(-1, 1, s))
    D_G = scaled((G - G.T).tocsr(), damp)
    K_g = scaled(_random_sym(n, density, rng), knorm)
    R = sp.random(n, n, density=density, random_state=rng, data_rvs=lambda s: rng.uniform(-1, 1, s))
    K_R = scaled(R.tocsr(), knorm)
    return QepParts(M, K_E, D_M, D_R, D_G, K_g, K_R)
