"""Exception hierarchy shared across the package."""


class QrestError(Exception):
    """Base class for all package errors."""


class InvalidSubsystem(QrestError, IndexError):
    pass


class NotHermitian(QrestError, ValueError):
    pass


class DimensionMismatch(QrestError, ValueError):
    pass


class ParamOutOfRange(QrestError, ValueError):
    pass


class NotBipartite(QrestError, ValueError):
    pass


class WrongSystem(QrestError, ValueError):
    pass


class SchemaMismatch(QrestError, ValueError):
    pass


class UnsupportedSystem(QrestError, ValueError):
    pass


class MissingArtifacts(QrestError, FileNotFoundError):
    pass


class SolverFailure(QrestError, RuntimeError):
    """Raised when an SDP does not reach an optimal status.

    The best iterate (an :class:`~qrest.sdp.SdpSolution`) is kept on
    ``solution`` so callers can still inspect the gap.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class NonConvergence(QrestError, RuntimeError):
    def __init__(self, message, model=None):
        super().__init__(message)
        self.model = model


class MapeUndefined(UserWarning):
    """Emitted when MAPE cannot be computed because a label is exactly zero."""


class FailureBudgetExceeded(QrestError, RuntimeError):
    """Too many per-record solver failures during a labeling run."""
