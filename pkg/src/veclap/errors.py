"""Exception hierarchy shared across the package.

Two branches matter for the CLI exit codes: ``InputError`` (bad arguments or
data, exit code 2) and ``NumericalError`` (a computation failed, exit code 3).
"""


class VeclapError(Exception):
    """Base class for all package errors."""


class InputError(VeclapError, ValueError):
    """Invalid argument, configuration, or matrix property (e.g. B not SPD)."""


class DomainError(InputError):
    """Point outside the tubular neighborhood where the geometry is defined."""


class NumericalError(VeclapError, RuntimeError):
    """A numerical computation failed."""


class GeometryError(NumericalError):
    """Degenerate element geometry (singular metric, non-positive area factor)."""


class ConvergenceError(NumericalError):
    """Iterative eigensolver did not reach the residual tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals
