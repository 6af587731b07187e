"""Preconditioner constructions and the spec-string front end used by the CLI.

Spec strings::

    none                      identity
    ilu0                      ILU(0)
    milu:<tol>                modified threshold ILU
    ilut:<tol>                threshold ILU
    ildlt:<level>:<tol>       incomplete Bunch-Kaufman LDL^T
    ildlt-mod:<level>:<tol>   same, with D made positive definite
    smw:<inner-spec>          Sherman-Morrison-Woodbury inverse of M_mr around <inner-spec>
"""

from __future__ import annotations

from ..errors import SpecError
from .base import PreconditionerAction, as_action, identity_action
from .deflation import DeflatedOperator, SmwInverse, deflated_apply, smw_apply
from .ilu import IluFactors, ilu0, ilut
from .ldlt import BlockLDLFactors, ildlt, modify_block_diagonal, positivize_block

__all__ = [
    "PreconditionerAction",
    "as_action",
    "identity_action",
    "DeflatedOperator",
    "SmwInverse",
    "deflated_apply",
    "smw_apply",
    "IluFactors",
    "ilu0",
    "ilut",
    "BlockLDLFactors",
    "ildlt",
    "modify_block_diagonal",
    "positivize_block",
    "build_preconditioner",
    "parse_precond_spec",
]


def parse_precond_spec(spec: str) -> tuple[str, tuple]:
    """Split a spec string into ``(kind, params)`` and validate it."""
    spec = spec.strip()
    kind, _, rest = spec.partition(":")
    kind = kind.lower()
    try:
        if kind in ("none", "identity", ""):
            return "none", ()
        if kind == "ilu0":
            return "ilu0", ()
        if kind in ("milu", "ilut"):
            return kind, (float(rest),)
        if kind in ("ildlt", "ildlt-mod"):
            level, tol = rest.split(":")
            return kind, (int(level), float(tol))
        if kind == "smw":
            if not rest:
                raise ValueError("missing inner spec")
            parse_precond_spec(rest)
            return "smw", (rest,)
    except ValueError as exc:
        raise SpecError(f"bad preconditioner spec {spec!r}: {exc}") from None
    raise SpecError(
        f"unknown preconditioner {spec!r}; expected none, ilu0, milu:<tol>, ilut:<tol>, "
        "ildlt:<level>:<tol>, ildlt-mod:<level>:<tol> or smw:<inner>"
    )


def build_preconditioner(spec: str, A, basis=None, **ldlt_options) -> PreconditionerAction:
    """Construct the action described by ``spec`` for matrix ``A``.

    ``smw:`` needs the deflation ``basis``. Extra keyword arguments go to
    :func:`ildlt` (``ordering``, ``equilibrate``).
    """
    kind, params = parse_precond_spec(spec)
    if kind == "none":
        return identity_action()
    if kind == "ilu0":
        return ilu0(A).action()
    if kind == "milu":
        return ilut(A, params[0], modified=True).action()
    if kind == "ilut":
        return ilut(A, params[0], modified=False).action()
    if kind == "ildlt":
        return ildlt(A, params[0], params[1], **ldlt_options).action()
    if kind == "ildlt-mod":
        return modify_block_diagonal(ildlt(A, params[0], params[1], **ldlt_options)).action()
    if kind == "smw":
        if basis is None:
            raise SpecError("smw preconditioner needs a deflation basis")
        inner = build_preconditioner(params[0], A, **ldlt_options)
        return SmwInverse(inner, basis).action()
    raise AssertionError(kind)
