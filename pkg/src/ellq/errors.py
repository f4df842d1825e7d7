"""Exception hierarchy. CLI exit codes key off these classes."""


class EllqError(Exception):
    """Base class for all errors raised by the package."""


class InvalidParameterError(EllqError, ValueError):
    """A parameter violates its documented precondition."""


class InvalidThresholdError(InvalidParameterError):
    """The residual threshold breaks the beta0 < 1 hypothesis."""


class ConfigError(InvalidParameterError):
    """A config file or command-line value could not be parsed."""


class AssemblyError(EllqError):
    """Finite element assembly produced (or was given) unusable data."""


class DenseCeilingError(EllqError):
    """A dense operation was requested above the configured size ceiling."""


class DivergenceError(EllqError, FloatingPointError):
    """The time integrator produced non-finite values."""


class UndefinedProbabilityError(EllqError, ZeroDivisionError):
    """Residual probability requested for the all-zero joint state."""


class NoEntryError(EllqError):
    """The checkpoint schedule was exhausted without an accepted entry test."""

    def __init__(self, message, last_p_hat=None, log=None):
        super().__init__(message)
        self.last_p_hat = last_p_hat
        self.log = log or []
