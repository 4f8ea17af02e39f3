"""Exception hierarchy shared by every balancekit module."""


class BalanceError(Exception):
    """Base class for all balancekit errors."""


class NotBalanceable(BalanceError):
    """The arc digraph of the matrix is not strongly connected."""


class EmptyMatrix(BalanceError):
    """The matrix has no off-diagonal non-zero entries."""


class Overflow(BalanceError, ArithmeticError):
    """A scaled entry left the binary64 range (overflow or underflow to zero)."""


class DegenerateWeights(BalanceError):
    """Sampling weights of the randomized engine sum to zero."""


class CapExhausted(BalanceError):
    """An iteration budget ran out before the requested tolerance was met."""


class InvalidCycle(BalanceError):
    """A node sequence is not a directed cycle of the problem."""


class InvariantViolation(BalanceError, AssertionError):
    """A debug-mode invariant check failed."""


class ParseError(BalanceError, ValueError):
    """Malformed Matrix Market input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionMismatch(BalanceError, ValueError):
    """The input matrix is not square."""
