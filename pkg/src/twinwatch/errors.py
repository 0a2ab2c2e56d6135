"""Exception hierarchy shared by all twinwatch modules."""


class TwinwatchError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(TwinwatchError, ValueError):
    """Operands have non-conformable shapes."""


class NotPositiveDefiniteError(TwinwatchError, ValueError):
    """A matrix that must be (semi-)definite is not."""


class SingularInnovationError(NotPositiveDefiniteError):
    """Innovation covariance Q + C P C^T cannot be factorized."""


class UnobservableError(TwinwatchError, ValueError):
    """The hidden state cannot be recovered from the given measurement."""


class TelemetryError(TwinwatchError, ValueError):
    """Malformed or inconsistent telemetry data."""


class ReplayError(TwinwatchError):
    """A consumer failed during replay.

    ``delivered`` is the number of messages handed over successfully before
    the failure.
    """

    def __init__(self, message, delivered):
        super().__init__(message)
        self.delivered = delivered
