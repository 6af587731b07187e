"""Acceptance criteria, one test each.

Every test records a PASS/FAIL/SKIP line; the lines are printed in the
terminal summary (see ``conftest.py``) and, when this file is run as a
script, directly to stdout.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import planted_symmetric, shifted_laplacian_2d
from minrescg.bench.experiment import storage_vectors
from minrescg.bench.fetch import fetch_matrix
from minrescg.eigdefl import DeflationBasis, negative_eigenpairs
from minrescg.errors import FetchError
from minrescg.krylov import SolveConfig, bicgstab, gmres_restarted, minres, pcg, run_solver
from minrescg.precond import DeflatedOperator, build_preconditioner, ilu0
from minrescg.shiftreal import (
    ShiftParams,
    ShiftSolveConfig,
    assemble_qep,
    companion_pencil,
    schur_s2,
    solve_shifted,
    synthetic_qep,
)
from minrescg.sparse import SparseSymMatrix, load_matrix_market

RESULTS: dict[int, tuple[str, str]] = {}


def record(n, ok, detail):
    status = "PASS" if ok else "FAIL"
    RESULTS[n] = (status, detail)
    print(f"criterion {n}: {status} ({detail})")
    assert ok, detail


def exact_basis(A):
    w, Q = np.linalg.eigh(A)
    neg = w < 0
    return DeflationBasis(Q[:, neg], w[neg], np.zeros(int(neg.sum())))


def instances(count, n, kmax, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        k = int(rng.integers(1, kmax + 1))
        A, _, _ = planted_symmetric(n, k, rng)
        yield A, k, rng


def test_criterion_1_two_iterations():
    worst_iters, worst_res = 0, 0.0
    for A, _, rng in instances(20, 60, 8, 1):
        Minv = np.linalg.inv(DeflatedOperator(A, exact_basis(A)).toarray())
        b = rng.standard_normal(60)
        x, rep = minres(SparseSymMatrix.from_scipy(sp.csr_matrix(A), sym_tol=None), Minv, b,
                        SolveConfig(rel_tol=1e-12, max_iters=10))
        res = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
        worst_iters = max(worst_iters, rep.outer_iters if rep.converged else np.inf)
        worst_res = max(worst_res, res)
    record(1, worst_iters <= 2 and worst_res <= 1e-12,
           f"max iterations {worst_iters}, max relative residual {worst_res:.2e}")


def test_criterion_2_spectrum():
    worst = 0.0
    for A, _, _ in instances(20, 60, 8, 1):
        M = DeflatedOperator(A, exact_basis(A)).toarray()
        ev = np.linalg.eigvals(np.linalg.solve(M, A))
        worst = max(worst, float(np.max(np.minimum(np.abs(ev - 1), np.abs(ev + 1)))))
    record(2, worst <= 1e-10, f"max distance to +-1: {worst:.2e}")


def test_criterion_3_smw_identity():
    worst = 0.0
    for A, _, _ in instances(20, 60, 8, 3):
        B = exact_basis(A)
        Mmr = A + 2 * (B.V * np.abs(B.lam)) @ B.V.T
        Minv = np.linalg.inv(A) - 2 * (B.V / B.lam) @ B.V.T
        worst = max(worst, float(np.linalg.norm(Mmr @ Minv - np.eye(60))))
    record(3, worst <= 1e-10, f"max Frobenius defect {worst:.2e}")


def test_criterion_4_indefinite_cg():
    rng = np.random.default_rng(4)
    failures, worst_rise = 0, 0.0
    n = 80
    for _ in range(50):
        W, _, _ = planted_symmetric(n, 0, rng)
        M, _, _ = planted_symmetric(n, int(rng.integers(1, 20)), rng)
        b = rng.standard_normal(n)
        xstar = np.linalg.solve(W, b)
        errs = [np.sqrt(xstar @ W @ xstar)]

        def cb(x, it):
            e = x - xstar
            errs.append(np.sqrt(e @ W @ e))

        _, rep = pcg(SparseSymMatrix.from_scipy(sp.csr_matrix(W), sym_tol=None), np.linalg.inv(M), b,
                     SolveConfig(rel_tol=1e-10, max_iters=10 * n), callback=cb)
        e = np.asarray(errs)
        if not rep.converged or rep.failure_kind == "scalar_breakdown":
            failures += 1
        worst_rise = max(worst_rise, float(np.max(np.diff(e)) / e[0]))
    record(4, failures == 0 and worst_rise <= 1e-10,
           f"{failures} non-converged runs, largest relative W-norm increase {worst_rise:.2e}")


def clustered_fraction(A, basis, m_cg, itol):
    op = DeflatedOperator(A, basis)
    cfg = SolveConfig(rel_tol=itol, max_iters=20_000)
    Ad = A.toarray()
    cols = [pcg(op, m_cg, Ad[:, j], cfg)[0] for j in range(A.n)]
    ev = np.linalg.eigvals(np.column_stack(cols))
    near = np.minimum(np.abs(ev - 1), np.abs(ev + 1)) <= 0.1
    return float(np.mean(near))


def test_criterion_5_clustering():
    A = shifted_laplacian_2d(15, 20, 10)
    basis = negative_eigenpairs(A)
    assert basis.k == 10
    m_cg = ilu0(A).action()
    fr = [clustered_fraction(A, basis, m_cg, t) for t in (1e-2, 1e-3, 1e-4)]
    record(5, fr[0] <= fr[1] <= fr[2], "fractions within 0.1 of +-1: " + ", ".join(f"{f:.3f}" for f in fr))


CASES = [
    ("bcsstm10", 0.0), ("nasa1824", 0.0), ("benzene", 0.0), ("si5h12", 0.0),
    ("sio", 0.0), ("sio", 0.25), ("sio", 0.5), ("sio", 0.75),
]
GMRES20_FAILS = {("bcsstm10", 0.0), ("nasa1824", 0.0), ("sio", 0.25), ("sio", 0.75)}


@pytest.mark.network
def test_criterion_6_collection_trends():
    paths = {}
    try:
        for name in sorted({c for c, _ in CASES}):
            paths[name] = fetch_matrix(name)
    except FetchError as exc:
        RESULTS[6] = ("SKIP", f"collection unavailable: {exc}")
        pytest.skip(f"collection unavailable: {exc}")
    rng = np.random.default_rng(0)
    cfg = SolveConfig(rel_tol=1e-5, inner_tol=1e-3, max_iters=20_000)
    bad_nested, gmres_failed, lines = [], 0, []
    for name, sigma in CASES:
        A = load_matrix_market(paths[name])
        A = A.shifted(sigma) if sigma else A
        b = rng.uniform(-1, 1, A.n)
        basis = negative_eigenpairs(A)
        M = build_preconditioner("ilu0", A)
        _, rep = run_solver("minres-cg", A, b, M, basis=basis, cfg=cfg)
        if not rep.converged or rep.outer_iters > 8:
            bad_nested.append(f"{name}({sigma}) {rep.status} outer={rep.outer_iters}")
        if (name, sigma) in GMRES20_FAILS:
            _, g = gmres_restarted(A, M, b, SolveConfig(rel_tol=1e-5, restart=20, max_iters=20_000))
            gmres_failed += not g.converged
        lines.append(f"{name}({sigma}): outer {rep.outer_iters}")
    record(6, not bad_nested and gmres_failed >= 3,
           f"nested failures {bad_nested or 'none'}; GMRES(20) failed on {gmres_failed} of {len(GMRES20_FAILS)}")


def test_criterion_7_complex_equivalence():
    rng = np.random.default_rng(7)
    worst = 0.0
    cfg = ShiftSolveConfig(inner_solver="direct", outer_tol=1e-12, s2_tol=1e-13)
    for trial in range(20):
        p = synthetic_qep(2, 4, target_negatives=int(rng.integers(1, 7)), seed=trial,
                          perturbation=float(rng.uniform(1e-3, 1e-1)))
        gr = float(rng.uniform(-50, 1000))
        gi = float(rng.uniform(1, 20000)) * (1 if rng.random() < 0.8 else -1)
        params = ShiftParams(float(rng.uniform(2 * np.pi, 8 * np.pi)), 5.0, gr, gi)
        D, K = assemble_qep(p, params)
        A, B = companion_pencil(p.M_mass, D, K)
        b = rng.standard_normal(2 * p.n) + 1j * rng.standard_normal(2 * p.n)
        z, rep = solve_shifted(p, params, b, cfg)
        oracle = np.linalg.solve(params.gamma * B.toarray() - A.toarray(), b)
        worst = max(worst, float(np.linalg.norm(z - oracle) / np.linalg.norm(oracle)))
    record(7, worst <= 1e-8, f"max relative error {worst:.2e}")


def test_criterion_8_schur_identity():
    rng = np.random.default_rng(8)
    worst = 0.0
    n = 12
    for _ in range(20):
        X, Y = rng.standard_normal((n, n)), rng.standard_normal((n, n))
        K = X @ X.T + n * np.eye(n)
        M = Y @ Y.T / n + 0.1 * np.eye(n)
        gamma = complex(rng.uniform(-5, 5), rng.uniform(0.2, 5))
        I, Z = np.eye(n), np.zeros((n, n))
        At = np.block([[gamma.real * I, -I], [K, gamma.real * M]])
        Bt = gamma.imag * np.block([[I, Z], [Z, M]])
        S = Bt + At @ np.linalg.solve(Bt, At)
        S1 = np.block([[np.linalg.inv(M), Z], [Z, I]])
        S2 = schur_s2(K, M, gamma).toarray()
        worst = max(worst, float(np.linalg.norm(S1 @ S2 - S) / np.linalg.norm(S)))
    record(8, worst <= 1e-10, f"max relative Frobenius defect {worst:.2e}")


def test_criterion_9_counting():
    eye = SparseSymMatrix.from_scipy(sp.identity(5, format="csr"))
    _, rb = bicgstab(eye, None, np.ones(5))
    D = SparseSymMatrix.from_scipy(sp.diags([1.0, 2.0, 3.0]).tocsr())
    _, rg = gmres_restarted(D, None, np.ones(3), SolveConfig(rel_tol=1e-10, restart=2))
    flat_ok = rg.converged and rg.total_iters == (rg.restart_cycles - 1) * 2 + rg.last_cycle_iters
    store = {s: storage_vectors(s, 54) for s in ("minres", "minres-cg", "gmres:120", "fgmres:120:120", "bicgstab")}
    expected = {"minres": 7, "minres-cg": 11 + 54, "gmres:120": 122, "fgmres:120:120": 364, "bicgstab": 6}
    record(9, rb.outer_iters == 0.5 and flat_ok and store == expected,
           f"BiCGStab {rb.outer_iters}; GMRES(2) {rg.gmres_notation()} -> {rg.total_iters}; storage {store}")


if __name__ == "__main__":
    import sys

    checks = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    failed = 0
    for check in checks:
        try:
            check()
        except AssertionError:
            failed += 1
        except pytest.skip.Exception as exc:
            print(f"{check.__name__}: SKIP ({exc})")
    sys.exit(1 if failed else 0)
