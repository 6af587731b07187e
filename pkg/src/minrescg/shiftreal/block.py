"""Real double-size form of the complex shifted system and its block preconditioner.

For ``C = gamma B - A`` with ``gamma = g_r + i g_i`` the complex system
``C (x + i y) = f + i g`` is equivalent to the real system

    [[B_hat, -A_hat], [A_hat, B_hat]] [x; -y] = [g; f]

with ``A_hat = g_r B - A`` and ``B_hat = g_i B``. The preconditioner keeps
only the mass and elastic stiffness parts of ``A_hat``, and its Schur
complement ``S = B + A B^{-1} A`` factors as ``blockdiag(M^{-1}, I) S_2``.
The diagonal blocks of ``S_2`` are ``T = -(K_E - |gamma|^2 M) / g_i``, so
every solve with ``T`` is a symmetric indefinite solve with
``K_E - |gamma|^2 M``, which only depends on ``|gamma|``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..eigdefl import DeflationBasis, EigConfig, negative_eigenpairs
from ..errors import DimensionError, InnerSolveError, NumericallySingularError, ShiftError
from ..krylov import SolveConfig, fgmres_gmres, gmres_restarted, minres_cg
from ..precond import PreconditionerAction, build_preconditioner
from ..sparse import SparseSymMatrix
from .qep import QepParts, ShiftParams, _csr, assemble_qep, companion_pencil

__all__ = [
    "RealBlockSystem",
    "real_block_system",
    "ShiftSolveConfig",
    "InnerSystem",
    "InnerSolverCache",
    "inner_matrix",
    "schur_s2",
    "SchurSolver",
    "schur_solve",
    "ShiftPreconditioner",
    "block_precond_apply",
    "ShiftSolveReport",
    "solve_shifted",
]


@dataclass(frozen=True, eq=False)
class RealBlockSystem:
    """The 4n real operator, applied block-wise from ``A_hat`` and ``B_hat``."""

    A_hat: sp.csr_matrix
    B_hat: sp.csr_matrix

    @property
    def n2(self) -> int:
        return self.A_hat.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (2 * self.n2, 2 * self.n2)

    def matvec(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (2 * self.n2,):
            raise DimensionError(f"vector of shape {z.shape} for a system of size {2 * self.n2}")
        z1, z2 = z[: self.n2], z[self.n2:]
        return np.concatenate([self.B_hat @ z1 - self.A_hat @ z2, self.A_hat @ z1 + self.B_hat @ z2])

    __matmul__ = matvec

    def pack_rhs(self, b) -> np.ndarray:
        """Complex ``f + i g`` to the real right-hand side ``[g; f]``."""
        b = np.asarray(b, dtype=np.complex128)
        if b.shape != (self.n2,):
            raise DimensionError(f"rhs of shape {b.shape}, expected ({self.n2},)")
        return np.concatenate([b.imag, b.real])

    def unpack(self, z) -> np.ndarray:
        """Real unknown ``[x; -y]`` to ``x + i y``."""
        z = np.asarray(z, dtype=np.float64)
        return z[: self.n2] - 1j * z[self.n2:]

    def toarray(self) -> np.ndarray:
        A, B = self.A_hat.toarray(), self.B_hat.toarray()
        return np.block([[B, -A], [A, B]])


def real_block_system(A_pencil, B_pencil, gamma: complex) -> RealBlockSystem:
    gamma = complex(gamma)
    if gamma.imag == 0:
        raise ShiftError("the real form needs a shift with nonzero imaginary part")
    A, B = _csr(A_pencil), _csr(B_pencil)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise DimensionError(f"pencil shapes differ: {A.shape} vs {B.shape}")
    return RealBlockSystem((gamma.real * B - A).tocsr(), (gamma.imag * B).tocsr())


@dataclass(frozen=True)
class ShiftSolveConfig:
    """Solver choices for the three nested levels.

    ``outer_*`` drive the 4n system, ``s2_*`` the ``S_2`` solve inside the
    Schur step, and ``inner_*`` the symmetric indefinite solves with
    ``K_E - |gamma|^2 M``. ``inner_solver`` is ``"minres-cg"`` or ``"direct"``
    (sparse LU, for testing). ``cg_tol`` is the inner CG tolerance of
    MINRES-CG.
    """

    outer_solver: str = "gmres"
    outer_tol: float = 1e-6
    outer_restart: int = 40
    outer_max_iters: int = 2000
    s2_tol: float = 1e-8
    s2_restart: int = 40
    s2_max_iters: int = 500
    inner_solver: str = "minres-cg"
    inner_tol: float = 1e-10
    cg_tol: float = 1e-2
    inner_precond: str = "ilu0"
    inner_max_iters: int = 20_000
    eig: EigConfig = field(default_factory=EigConfig)

    def __post_init__(self):
        if self.outer_solver not in ("gmres", "fgmres"):
            raise ValueError(f"outer_solver must be gmres or fgmres, not {self.outer_solver!r}")
        if self.inner_solver not in ("minres-cg", "direct"):
            raise ValueError(f"inner_solver must be minres-cg or direct, not {self.inner_solver!r}")


def _abs2_key(gamma: complex) -> float:
    """``|gamma|^2`` rounded to 12 significant digits."""
    return float(f"{abs(gamma) ** 2:.12g}")


def inner_matrix(K_E, M_mass, gamma: complex) -> SparseSymMatrix:
    """``K_E - |gamma|^2 M`` with ``|gamma|^2`` quantized, so equal moduli give identical bits."""
    H = (_csr(K_E) - _abs2_key(gamma) * _csr(M_mass)).tocsr()
    return SparseSymMatrix.from_scipy(H, sym_tol=1e-12)


@dataclass(frozen=True, eq=False)
class InnerSystem:
    abs2: float
    H: SparseSymMatrix
    basis: DeflationBasis | None
    m_cg: PreconditionerAction | None
    lu: object | None


class InnerSolverCache:
    """Per-``|gamma|^2`` deflation bases and factorizations.

    Entries are built at most once per key even with concurrent callers;
    readers of existing entries never block on other keys.
    """

    def __init__(self):
        self._entries: dict[float, InnerSystem] = {}
        self._locks: dict[float, threading.Lock] = {}
        self._guard = threading.Lock()
        self.builds = 0

    def __len__(self):
        return len(self._entries)

    def get(self, K_E, M_mass, gamma: complex, cfg: ShiftSolveConfig) -> InnerSystem:
        key = _abs2_key(gamma)
        entry = self._entries.get(key)
        if entry is not None:
            return entry
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            entry = self._entries.get(key)
            if entry is None:
                entry = _build_inner(K_E, M_mass, gamma, cfg)
                self._entries[key] = entry
                self.builds += 1
        return entry


def _build_inner(K_E, M_mass, gamma, cfg: ShiftSolveConfig) -> InnerSystem:
    H = inner_matrix(K_E, M_mass, gamma)
    try:
        if cfg.inner_solver == "direct":
            return InnerSystem(_abs2_key(gamma), H, None, None, spla.splu(H.to_scipy().tocsc()))
        basis = negative_eigenpairs(H, cfg.eig)
    except (NumericallySingularError, RuntimeError) as exc:
        raise ShiftError(
            f"K_E - |gamma|^2 M is numerically singular at |gamma| = {abs(gamma):.6g}; "
            f"perturb the shift slightly ({exc})"
        ) from exc
    m_cg = build_preconditioner(cfg.inner_precond, H, basis=basis)
    return InnerSystem(_abs2_key(gamma), H, basis, m_cg, None)


def schur_s2(K_E, M_mass, gamma: complex) -> sp.csr_matrix:
    """Sparse ``S_2`` with ``S = blockdiag(M^{-1}, I) S_2``."""
    K, M = _csr(K_E), _csr(M_mass)
    gr, gi = gamma.real, gamma.imag
    T = (gi + gr * gr / gi) * M - K / gi
    c = 2.0 * gr / gi
    return sp.bmat([[T, -c * M], [c * K, T]], format="csr")


@dataclass
class _Stats:
    s2_iters: list = field(default_factory=list)
    inner_outer_iters: list = field(default_factory=list)
    inner_cg_iters: list = field(default_factory=list)
    failures: list = field(default_factory=list)


class SchurSolver:
    """Applies ``S^{-1}``: scale by ``blockdiag(M, I)``, then solve with ``S_2``.

    The ``S_2`` solve is GMRES preconditioned with the block lower
    triangular ``S2_tilde`` (``S_2`` without its ``-2 g_r/g_i M`` block).
    """

    def __init__(self, K_E, M_mass, gamma: complex, cfg: ShiftSolveConfig | None = None,
                 cache: InnerSolverCache | None = None, stats: _Stats | None = None):
        gamma = complex(gamma)
        if gamma.imag == 0:
            raise ShiftError("gamma_i must be nonzero")
        self.K = _csr(K_E)
        self.M = _csr(M_mass)
        self.n = self.K.shape[0]
        self.gamma = gamma
        self.cfg = cfg or ShiftSolveConfig()
        self.cache = cache if cache is not None else InnerSolverCache()
        self.stats = stats if stats is not None else _Stats()
        self.S2 = schur_s2(self.K, self.M, gamma)
        self.inner = self.cache.get(self.K, self.M, gamma, self.cfg)
        self._c = 2.0 * gamma.real / gamma.imag

    def solve_T(self, v) -> np.ndarray:
        """``T u = v``, i.e. ``(K_E - |gamma|^2 M) u = -g_i v``."""
        rhs = -self.gamma.imag * v
        if self.inner.lu is not None:
            return self.inner.lu.solve(rhs)
        cfg = SolveConfig(rel_tol=self.cfg.inner_tol, max_iters=self.cfg.inner_max_iters, inner_tol=self.cfg.cg_tol)
        u, rep = minres_cg(self.inner.H, self.inner.basis, self.inner.m_cg, rhs, cfg)
        self.stats.inner_outer_iters.append(rep.outer_iters)
        self.stats.inner_cg_iters.append(rep.inner_iters_total)
        if not rep.converged:
            self.stats.failures.append(("inner", rep.failure_kind))
        if not np.all(np.isfinite(u)):
            raise InnerSolveError("inner", "MINRES-CG returned a non-finite vector", rep)
        return u

    def apply_S2_tilde_inv(self, v) -> np.ndarray:
        n = self.n
        w1 = self.solve_T(v[:n])
        w2 = self.solve_T(v[n:] - self._c * (self.K @ w1))
        return np.concatenate([w1, w2])

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=np.float64)
        n = self.n
        if rhs.shape != (2 * n,):
            raise DimensionError(f"Schur rhs of shape {rhs.shape}, expected ({2 * n},)")
        w = np.concatenate([self.M @ rhs[:n], rhs[n:]])
        cfg = SolveConfig(rel_tol=self.cfg.s2_tol, max_iters=self.cfg.s2_max_iters, restart=self.cfg.s2_restart)
        y, rep = gmres_restarted(self.S2, PreconditionerAction(self.apply_S2_tilde_inv, "S2_tilde"), w, cfg)
        self.stats.s2_iters.append(rep.outer_iters)
        if not rep.converged:
            self.stats.failures.append(("schur", rep.failure_kind))
        if not np.all(np.isfinite(y)):
            raise InnerSolveError("schur", "S_2 solve returned a non-finite vector", rep)
        return y


def schur_solve(K_E, M_mass, gamma: complex, rhs, *, cfg: ShiftSolveConfig | None = None,
                cache: InnerSolverCache | None = None) -> np.ndarray:
    """Apply ``S^{-1}`` to ``rhs`` for ``S = B + A B^{-1} A`` built from ``K_E``, ``M`` and ``gamma``."""
    return SchurSolver(K_E, M_mass, gamma, cfg, cache).solve(rhs)


class ShiftPreconditioner:
    """Block LU solve with ``[[B, -A], [A, B]]``, ``A = [[g_r I, -I], [K_E, g_r M]]``, ``B = g_i blockdiag(I, M)``.

    It does not depend on ``Omega``, ``Omega_ref`` or on any part other than
    ``K_E`` and ``M``.
    """

    def __init__(self, K_E, M_mass, gamma: complex, cfg: ShiftSolveConfig | None = None,
                 cache: InnerSolverCache | None = None):
        self.schur = SchurSolver(K_E, M_mass, gamma, cfg, cache)
        self.K, self.M, self.n = self.schur.K, self.schur.M, self.schur.n
        self.gamma = complex(gamma)
        self._Mlu = spla.splu(self.M.tocsc())

    @property
    def stats(self) -> _Stats:
        return self.schur.stats

    def _B_solve(self, r):
        n, gi = self.n, self.gamma.imag
        return np.concatenate([r[:n] / gi, self._Mlu.solve(r[n:]) / gi])

    def _A_apply(self, v):
        n, gr = self.n, self.gamma.real
        a, b = v[:n], v[n:]
        return np.concatenate([gr * a - b, self.K @ a + gr * (self.M @ b)])

    def apply(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        n2 = 2 * self.n
        if r.shape != (2 * n2,):
            raise DimensionError(f"vector of shape {r.shape}, expected ({2 * n2},)")
        u1 = self._B_solve(r[:n2])
        t2 = self.schur.solve(r[n2:] - self._A_apply(u1))
        t1 = u1 + self._B_solve(self._A_apply(t2))
        return np.concatenate([t1, t2])

    __call__ = apply

    def action(self) -> PreconditionerAction:
        return PreconditionerAction(self.apply, f"shift-block({self.schur.cfg.inner_solver})")

    def toarray(self) -> np.ndarray:
        """Dense ``[[B, -A], [A, B]]`` (for testing)."""
        n, gr, gi = self.n, self.gamma.real, self.gamma.imag
        I = np.eye(n)
        K, M = self.K.toarray(), self.M.toarray()
        A = np.block([[gr * I, -I], [K, gr * M]])
        B = gi * np.block([[I, np.zeros((n, n))], [np.zeros((n, n)), M]])
        return np.block([[B, -A], [A, B]])


def block_precond_apply(sys: RealBlockSystem, tilde_parts, rhs, *, cfg: ShiftSolveConfig | None = None,
                        cache: InnerSolverCache | None = None) -> np.ndarray:
    """One application of the block preconditioner built from ``tilde_parts = (K_E, M, gamma)``."""
    K_E, M_mass, gamma = tilde_parts
    if 2 * _csr(K_E).shape[0] != sys.n2:
        raise DimensionError("preconditioner parts do not match the system size")
    return ShiftPreconditioner(K_E, M_mass, gamma, cfg, cache).apply(rhs)


@dataclass
class ShiftSolveReport:
    outer: object
    s2_iters: list
    inner_outer_iters: list
    inner_cg_iters: list
    failures: list
    k: int | None

    @property
    def converged(self) -> bool:
        return self.outer.converged


def solve_shifted(parts: QepParts, params: ShiftParams, b, cfg: ShiftSolveConfig | None = None,
                  cache: InnerSolverCache | None = None):
    """Solve ``(gamma B - A) z = b`` for complex ``b`` of length ``2n`` through the real form.

    Returns ``(z, report)``.
    """
    cfg = cfg or ShiftSolveConfig()
    D, K = assemble_qep(parts, params)
    A, B = companion_pencil(parts.M_mass, D, K)
    system = real_block_system(A, B, params.gamma)
    P = ShiftPreconditioner(parts.K_E, parts.M_mass, params.gamma, cfg, cache)
    rhs = system.pack_rhs(b)
    scfg = SolveConfig(rel_tol=cfg.outer_tol, max_iters=cfg.outer_max_iters, restart=cfg.outer_restart,
                       inner_tol=0.0)
    op = (system.matvec, 2 * system.n2)
    if cfg.outer_solver == "gmres":
        z, rep = gmres_restarted(op, P.action(), rhs, scfg)
    else:
        z, rep = fgmres_gmres(op, P.action(), rhs, scfg, method=f"fgmres({cfg.outer_restart})")
    st = P.stats
    basis = P.schur.inner.basis
    report = ShiftSolveReport(rep, st.s2_iters, st.inner_outer_iters, st.inner_cg_iters, st.failures,
                              None if basis is None else basis.k)
    return system.unpack(z), report
