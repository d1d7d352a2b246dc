"""Exception hierarchy. The CLI maps these onto exit codes."""


class NgsvarError(Exception):
    """Base class for all package errors."""


class DomainError(NgsvarError, ValueError):
    """Parameter outside the domain of a distribution or operation."""


class DimensionError(NgsvarError, ValueError):
    """Array shapes or sample sizes are inconsistent."""


class DegenerateDensityError(NgsvarError):
    """A density is -inf (or undefined) everywhere it is evaluated."""


class DegenerateColumnError(NgsvarError, ValueError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class DecompositionError(NgsvarError, ArithmeticError):
    """A Cholesky factorisation failed; ``index`` names the block/equation/time."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class RankError(NgsvarError, ValueError):
    pass


class FitError(NgsvarError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class EstimatorError(NgsvarError):
    """Importance-sampling estimator produced no usable weights."""


class NormalizationError(NgsvarError, ValueError):
    pass


class SamplerError(NgsvarError):
    """A Gibbs step failed; ``iteration`` records where."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class RestrictionError(NgsvarError, ValueError):
    pass


class NotApplicableError(NgsvarError, ValueError):
    pass
