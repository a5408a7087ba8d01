"""Exception types raised by scaledvr.

All validation errors derive from ValueError so callers that do not care
about the distinction can catch the usual thing.
"""


class EmptyDimensionError(ValueError):
    """A vector of dimension zero was requested."""


class InvalidBatchError(ValueError):
    """Batch size out of range (empty, or larger than the sample count)."""


class InvalidProbabilityError(ValueError):
    """Probability outside its valid range."""


class InvalidWarmupError(ValueError):
    """Preconditioner warm-up requires at least one sample."""


class InvalidLabelError(ValueError):
    """Labels do not match the active loss's required domain."""


class LabelCardinalityError(ValueError):
    """Label normalization needs exactly two distinct raw values."""


class DegenerateSmoothnessError(ValueError):
    """All-zero dataset: the smoothness bound would be zero."""


class DegenerateDiagnosticError(ValueError):
    """The reference quantity of a diagnostic is zero; no relative error."""


class InvalidGridError(ValueError):
    """Grid search over an empty Cartesian product."""


class ParseError(ValueError):
    """Malformed LibSVM input, with 1-based line/column position."""

    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}"
        if column is not None:
            where += f", column {column}"
        super().__init__(f"{where}: {message}" if where else message)


class DivergenceError(RuntimeError):
    """An optimizer run produced a non-finite iterate or estimator.

    Carries the metric rows recorded before the run was aborted.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = list(trajectory) if trajectory is not None else []
