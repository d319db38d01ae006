"""Exception hierarchy shared by all fairpd modules."""


class FairPDError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(FairPDError, ValueError):
    """An array does not have the shape an operator expects."""


class ParameterError(FairPDError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ConfigurationError(FairPDError, ValueError):
    """A solver configuration is inconsistent or violates step-size conditions."""


class CapabilityError(FairPDError):
    """The requested closed-form evaluation is not available for this problem."""


class MetricError(FairPDError, ValueError):
    """A quality metric is undefined for the given inputs."""


class DivergenceError(FairPDError, ArithmeticError):
    """Iterates became non-finite.

    ``trace`` holds the rows recorded so far and ``state`` the last finite
    iterate, so callers can still report partial results.
    """

    def __init__(self, message, trace=None, state=None):
        super().__init__(message)
        self.trace = trace
        self.state = state
