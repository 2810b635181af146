"""Exception types shared across the package."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (singular system, non-finite result, no convergence).

    ``support`` carries the working support when the failure happened inside a
    solver step, ``estimate`` a partial result when one exists.
    """

    def __init__(self, message, support=None, estimate=None):
        super().__init__(message)
        self.support = support
        self.estimate = estimate


class ConditionError(ValueError):
    """Inputs violate a mathematical precondition (degenerate or rank-deficient data)."""


class ParseError(ValueError):
    """Malformed LIBSVM input; ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
