"""Exception hierarchy shared across the package."""


class MinresCGError(Exception):
    """Base class for all package errors."""


class DimensionError(MinresCGError, ValueError):
    pass


class MatrixMarketError(MinresCGError, ValueError):
    """Base class for Matrix Market parse failures."""


class MalformedHeaderError(MatrixMarketError):
    pass


class UnsupportedFieldError(MatrixMarketError):
    pass


class NotSymmetricError(MatrixMarketError):
    pass


class IndexOutOfRangeError(MatrixMarketError):
    pass


class ZeroPivotError(MinresCGError, ArithmeticError):
    def __init__(self, row: int, message: str | None = None):
        self.row = row
        super().__init__(message or f"zero pivot encountered in row {row}")


class FactorizationBreakdown(MinresCGError, ArithmeticError):
    pass


class SingularBlockError(MinresCGError, ArithmeticError):
    pass


class EigensolverError(MinresCGError, RuntimeError):
    def __init__(self, message: str, partial=None):
        self.partial = partial
        super().__init__(message)


class NumericallySingularError(MinresCGError, ArithmeticError):
    pass


class ShiftError(MinresCGError, ValueError):
    pass


class FetchError(MinresCGError, RuntimeError):
    pass


class SpecError(MinresCGError, ValueError):
    """Raised for unparseable solver / preconditioner spec strings."""


class InnerSolveError(MinresCGError, RuntimeError):
    """An inner solve inside a block preconditioner produced unusable output."""

    def __init__(self, stage: str, message: str, report=None):
        self.stage = stage
        self.report = report
        super().__init__(f"[{stage}] {message}")
