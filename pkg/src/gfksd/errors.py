"""Exception hierarchy shared across the package."""


class GfksdError(Exception):
    """Base class for all errors raised by gfksd."""


class DimensionMismatchError(GfksdError, ValueError):
    """Inputs have incompatible dimensions."""


class PreconditionError(GfksdError, ValueError):
    """An operation was called with inputs violating its preconditions."""


class UnsupportedOperationError(GfksdError, NotImplementedError):
    """The model does not provide the requested capability (e.g. no score)."""


class ConvergenceError(GfksdError):
    """An iterative method failed to converge.

    The best iterate found so far is kept on ``best`` so callers can inspect
    or restart from it.
    """

    def __init__(self, message, best=None, trace=None):
        super().__init__(message)
        self.best = best
        self.trace = trace


class DefinitenessError(GfksdError, ValueError):
    """A matrix required to be positive definite is not."""


class DegenerateError(GfksdError, ValueError):
    """A quantity collapsed (zero variance, zero normaliser, all weights underflow)."""


class EvaluationError(GfksdError, FloatingPointError):
    """A non-finite value appeared during evaluation.

    ``index`` names the offending particle when one can be identified.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NumericalError(GfksdError, ArithmeticError):
    """Generic numerical failure (root finding, ODE step underflow, ...)."""


class DivergenceError(GfksdError):
    """An optimisation run diverged; the partial trace is attached."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
