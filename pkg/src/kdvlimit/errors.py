"""Exception hierarchy shared by every module of the package."""


class KdvLimitError(Exception):
    """Base class for all errors raised by :mod:`kdvlimit`."""


class InvalidArgumentError(KdvLimitError, ValueError):
    pass


class NumericalFailure(KdvLimitError):
    """Any failure of a numerical procedure (CLI exit code 2)."""


class SolverDivergenceError(NumericalFailure):
    """Raised when a time integration produces non-finite values or drifts.

    ``last_valid_time`` is the time of the last state that passed all checks.
    """

    def __init__(self, message: str, last_valid_time: float | None = None, eps=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time
        self.eps = eps


class CFLViolationError(NumericalFailure):
    pass


class DegenerateFluxError(NumericalFailure):
    pass


class NewtonNonconvergenceError(NumericalFailure):
    pass


class PastBreakingError(NumericalFailure):
    pass


class ResolutionError(NumericalFailure):
    pass


class NonconvergenceError(NumericalFailure):
    pass


class NonmonotoneDataError(NumericalFailure):
    pass


class DomainError(NumericalFailure):
    pass
