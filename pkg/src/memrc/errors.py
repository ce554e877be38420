"""Exception types shared across the package."""


class MemrcError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(MemrcError, ValueError):
    """A parameter or configuration value violates its invariants."""


class OutOfRangeError(InvalidParameterError):
    """A normalized input lies outside [0, 1]."""


class InsufficientDataError(MemrcError, ValueError):
    pass


class IntegrationDivergedError(MemrcError, ArithmeticError):
    """The integrated state became non-finite.

    Attributes:
        t: time at which the non-finite value was detected.
        partial: optional partial result computed before divergence
            (e.g. a running Lyapunov estimate).
    """

    def __init__(self, message, t=None, partial=None):
        super().__init__(message)
        self.t = t
        self.partial = partial


class HarvestError(MemrcError):
    def __init__(self, message, u=None, index=None):
        super().__init__(message)
        self.u = u
        self.index = index


class CalibrationError(MemrcError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConfigError(MemrcError):
    """Missing or malformed experiment configuration."""
