"""Exception hierarchy shared by every module."""


class SisError(Exception):
    """Base class for library errors."""


class DataError(SisError, ValueError):
    """Malformed dataset or file."""


class LengthMismatch(SisError, ValueError):
    pass


class BadSize(SisError, ValueError):
    """Requested subset size is out of range."""


class BadSpec(SisError, ValueError):
    """Invalid penalty, solver, or simulation parameters."""


class NumericalError(SisError, ArithmeticError):
    """Base class for numerical failures (CLI exit code 3)."""


class RankDeficient(NumericalError):
    """Design columns are numerically collinear."""


class SingularSystem(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class ConvergenceWarning(UserWarning):
    """An iterative solver hit its iteration cap; the estimate is flagged, not discarded."""


class Infeasible(NumericalError):
    pass


class Unbounded(NumericalError):
    pass


class PivotLimit(NumericalError):
    pass


class OneClassOnly(SisError, ValueError):
    pass


class TargetSizeUnreachable(SisError, ValueError):
    pass


class StageError(SisError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, method, stage, cause):
        self.method = method
        self.stage = stage
        self.cause = cause
        super().__init__(f"{method}: stage {stage!r} failed: {cause}")


class SingularDraw(NumericalError):
    """A Monte Carlo draw produced a numerically singular matrix."""
