from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["PreconditionerAction", "identity_action", "as_action"]


@dataclass(frozen=True)
class PreconditionerAction:
    """A linear map ``v -> w`` approximating an inverse, plus a report label."""

    apply: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"

    def __call__(self, v):
        return self.apply(np.asarray(v, dtype=np.float64))


def identity_action() -> PreconditionerAction:
    return PreconditionerAction(lambda v: np.array(v, dtype=np.float64, copy=True), "none")


def as_action(precond) -> PreconditionerAction:
    """Coerce ``None``, a callable, a factor object or a dense inverse into an action."""
    if precond is None:
        return identity_action()
    if isinstance(precond, PreconditionerAction):
        return precond
    if hasattr(precond, "action"):
        return precond.action()
    if isinstance(precond, np.ndarray):
        Minv = precond
        return PreconditionerAction(lambda v: Minv @ v, "dense")
    if callable(precond):
        return PreconditionerAction(precond, getattr(precond, "__name__", "custom"))
    raise TypeError(f"cannot use {type(precond).__name__} as a preconditioner")
