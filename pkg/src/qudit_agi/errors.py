"""Exception types shared across the package.

Input validation problems (non-square, non-unitary, bad parameters) raise
plain :class:`ValueError`. The classes below mark failures that happen
*during* a computation, so callers (and the command line driver) can map
them to distinct exit codes.
"""


class QuditAgiError(Exception):
    """Base class for computational failures in this package."""


class NumericRangeError(QuditAgiError, ArithmeticError):
    """A result left the representable floating point range."""


class ConvergenceError(QuditAgiError, RuntimeError):
    """An iterative procedure did not reach its tolerance."""


class TruncationError(ConvergenceError):
    """A truncated series has a tail estimate above the requested tolerance."""


class BracketError(QuditAgiError, ValueError):
    """No sign change was found for a root search."""


class FitError(QuditAgiError, RuntimeError):
    """Nonlinear least squares failed or produced an unusable fit."""
