from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionError
from ..sparse import SparseSymMatrix, matvec

__all__ = [
    "SolveConfig",
    "SolveReport",
    "FAILURE_KINDS",
    "STATUS_SYMBOL",
    "as_operator",
    "relative_residual",
    "StagnationMonitor",
]

FAILURE_KINDS = ("none", "max_iters", "stagnation", "scalar_breakdown")
STATUS_SYMBOL = {"none": "ok", "max_iters": "†", "stagnation": "‡", "scalar_breakdown": "∗"}

STAGNATION_WINDOW = 50
STAGNATION_RTOL = 1e-14


@dataclass(frozen=True)
class SolveConfig:
    """Stopping rules. ``rel_tol`` always refers to ``||b - A x|| / ||b||``."""

    rel_tol: float = 1e-5
    max_iters: float = 20_000
    restart: int = 20
    inner_tol: float = 1e-3
    inner_max_iters: int = 20_000
    inner_restart: int = 120
    x0: np.ndarray | None = None

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.restart < 1 or self.inner_restart < 1:
            raise ValueError("restart must be >= 1")


@dataclass
class SolveReport:
    """Outcome of one solve.

    ``outer_iters`` may be fractional (BiCGStab half steps) or, for
    restarted GMRES, the flattened count ``(cycles - 1) * m + last``.
    ``history_index[j]`` is the iteration index at which
    ``true_residual_history[j]`` was taken (cumulative inner iterations for
    the nested MINRES-CG schemes).
    """

    method: str
    converged: bool = False
    outer_iters: float = 0
    inner_iters: list[int] = field(default_factory=list)
    true_residual_history: list[float] = field(default_factory=list)
    history_index: list[float] = field(default_factory=list)
    failure_kind: str = "none"
    restart_cycles: int | None = None
    last_cycle_iters: int | None = None
    restart: int | None = None
    precond_label: str = "none"
    message: str = ""

    @property
    def inner_iters_total(self) -> int:
        return int(sum(self.inner_iters))

    @property
    def inner_iters_avg(self) -> float | None:
        if not self.inner_iters and self.outer_iters == 0:
            return None
        if not self.inner_iters:
            return None
        return self.inner_iters_total / max(self.outer_iters, 1)

    @property
    def is_nested(self) -> bool:
        return self.method.startswith("minres-cg") or self.method.startswith("fgmres")

    @property
    def total_iters(self) -> float:
        """Headline total.

        MINRES-CG schemes count inner CG iterations only (so 4 outer steps
        averaging 177.75 inner give 711). FGMRES-GMRES counts outer steps plus
        all inner steps. Everything else reports its (flattened) outer count.
        """
        if self.method.startswith("minres-cg"):
            return self.inner_iters_total
        if self.method.startswith("fgmres"):
            return self.outer_iters + self.inner_iters_total
        return self.outer_iters

    @property
    def total_with_outer(self) -> float:
        return self.outer_iters + self.inner_iters_total

    @property
    def status(self) -> str:
        return STATUS_SYMBOL[self.failure_kind]

    @property
    def final_relative_residual(self) -> float:
        return self.true_residual_history[-1] if self.true_residual_history else math.nan

    def gmres_notation(self) -> str | None:
        if self.restart_cycles is None:
            return None
        return f"{self.restart_cycles}({self.last_cycle_iters})"

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(
            inner_iters_total=self.inner_iters_total,
            inner_iters_avg=self.inner_iters_avg,
            total_iters=self.total_iters,
            total_with_outer=self.total_with_outer,
            status=self.status,
            gmres_notation=self.gmres_notation(),
        )
        return d

    def record(self, index: float, relres: float) -> None:
        self.history_index.append(index)
        self.true_residual_history.append(float(relres))

    def fail(self, kind: str, message: str = "") -> None:
        assert kind in FAILURE_KINDS
        self.converged = False
        self.failure_kind = kind
        self.message = message


def as_operator(op) -> tuple[Callable[[np.ndarray], np.ndarray], int]:
    """Return ``(apply, n)`` for a matrix, linear operator or ``(callable, n)`` pair."""
    if isinstance(op, SparseSymMatrix):
        return (lambda x: matvec(op, x)), op.n
    if isinstance(op, tuple) and len(op) == 2 and callable(op[0]):
        return op[0], int(op[1])
    if sp.issparse(op) or isinstance(op, np.ndarray):
        if op.shape[0] != op.shape[1]:
            raise DimensionError(f"operator must be square, got {op.shape}")
        return (lambda x: op @ x), op.shape[0]
    if hasattr(op, "matvec") and hasattr(op, "shape"):
        return op.matvec, op.shape[0]
    raise TypeError(f"cannot use {type(op).__name__} as an operator")


def relative_residual(apply, b, x, bnorm=None) -> float:
    bnorm = np.linalg.norm(b) if bnorm is None else bnorm
    r = b - apply(x)
    return float(np.linalg.norm(r) / bnorm) if bnorm > 0 else float(np.linalg.norm(r))


class StagnationMonitor:
    """Flags stagnation when the best residual so far improved by less than
    ``rtol`` (relative) over the last ``window`` iterations.

    Using the running minimum keeps erratic but progressing methods such as
    BiCGStab from being flagged.
    """

    def __init__(self, window: int = STAGNATION_WINDOW, rtol: float = STAGNATION_RTOL):
        self.window = window
        self.rtol = rtol
        self.best: list[float] = []

    def push(self, value: float) -> bool:
        prev = self.best[-1] if self.best else math.inf
        self.best.append(min(prev, value))
        if len(self.best) <= self.window:
            return False
        old = self.best[-self.window - 1]
        return (old - self.best[-1]) < self.rtol * old


def prepare(op, b, cfg: SolveConfig):
    apply, n = as_operator(op)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise DimensionError(f"right-hand side of shape {b.shape} for operator of size {n}")
    x = np.zeros(n) if cfg.x0 is None else np.array(cfg.x0, dtype=np.float64)
    return apply, n, b, x
