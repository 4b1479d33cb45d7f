"""Exception types shared by the compute modules and the CLI."""


class DimerError(Exception):
    """Base class for all errors raised by :mod:`bhdimer`."""


class ParameterError(DimerError, ValueError):
    """Invalid physical or numerical input parameters."""


class DomainError(DimerError, ValueError):
    """A formula was evaluated outside the region where it is defined."""


class NumericalFailure(DimerError, RuntimeError):
    """An iterative method did not converge within its budget."""


class RabiRegimeWarning(UserWarning):
    """Parameters lie outside the weak-coupling regime u < 1."""
