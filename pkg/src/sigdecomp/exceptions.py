"""Exception types raised by the decomposition library."""


class SigDecompError(Exception):
    """Base class for all library errors."""


class ConfigError(SigDecompError):
    """A model or solver configuration is invalid.

    ``path`` points at the offending entry, e.g. ``components[2].lambda``.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class DataError(SigDecompError):
    """Input data violates a documented convention (shapes, NaN placement)."""


class DegenerateScaleError(SigDecompError):
    """A channel cannot be standardized (too few known entries or zero spread)."""


class DegenerateProblemError(SigDecompError):
    """A subproblem is singular or underdetermined for the given data pattern."""


class AmbiguousPhaseError(DegenerateProblemError):
    """A pure periodic constraint has a phase with no known entries.

    Nothing in the objective determines the value of that phase, so the
    proximal operator is not well defined.
    """


class ConvergenceError(SigDecompError):
    """An inner iterative subproblem hit its iteration cap.

    ``residual`` carries the last residual norm for diagnosis.
    """

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class DivergenceError(SigDecompError):
    """An iterate became non-finite; ``iteration`` is the first bad index."""

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        super().__init__(message)
