"""Exception hierarchy shared by every qsum module."""


class QsumError(Exception):
    """Base class for all errors raised by qsum."""


class InvalidArgumentError(QsumError, ValueError):
    """An argument is malformed (wrong shape, empty list, nonpositive parameter)."""


class NumericError(QsumError, ArithmeticError):
    """An oracle produced a non-finite value."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConfigurationError(QsumError, ValueError):
    """A solver or experiment was configured inconsistently.

    ``path`` names the offending configuration field when known, e.g.
    ``"run.trials"``.
    """

    def __init__(self, message, path=None):
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path


class ContractViolationError(QsumError):
    """An oracle broke its contract (non-unit direction, vector outside the cone)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class InfeasibleSetError(QsumError):
    """The intersection handed to a projector appears to be empty."""


class DomainError(QsumError, ValueError):
    """A point lies outside the domain on which an oracle is defined."""


class DegenerateDirectionError(QsumError):
    """No unit quasi-subgradient can be formed because the direction vanished."""


class ProjectionWarning(UserWarning):
    """Iterative projection stopped at ``max_sweeps`` before converging."""
