import numpy as np
import pytest
import scipy.sparse as sp

from minrescg.sparse import SparseSymMatrix


def planted_symmetric(n, k, rng, *, gap=0.1, spread=(0.5, 5.0)):
    """Random dense symmetric matrix with exactly ``k`` negative eigenvalues.

    Returns ``(A, Q, lam)`` where ``A = Q diag(lam) Q^T``.
    """
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    neg = -rng.uniform(gap + spread[0], spread[1], k)
    pos = rng.uniform(gap + spread[0], spread[1], n - k)
    lam = np.concatenate([neg, pos])
    A = (Q * lam) @ Q.T
    return 0.5 * (A + A.T), Q, lam


def shifted_laplacian_2d(nx, ny, k):
    """2D Dirichlet Laplacian shifted so exactly ``k`` eigenvalues are negative."""
    Tx = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nx, nx))
    Ty = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(ny, ny))
    L = (sp.kron(sp.identity(ny), Tx) + sp.kron(Ty, sp.identity(nx))).tocsr()
    ev = np.sort(np.linalg.eigvalsh(L.toarray()))
    if ev[k] - ev[k - 1] < 1e-8:
        raise ValueError(f"eigenvalues {k} and {k + 1} coincide; pick another grid or k")
    sigma = 0.5 * (ev[k - 1] + ev[k])
    return SparseSymMatrix.from_scipy(L - sigma * sp.identity(nx * ny))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        status, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
