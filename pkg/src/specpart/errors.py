"""Exception types shared across the package."""


class SpecpartError(Exception):
    """Base class for all errors raised by specpart."""


class ParseError(SpecpartError, ValueError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class DomainError(SpecpartError, ValueError):
    """An argument value is outside the documented domain."""


class ContractError(SpecpartError, ValueError):
    """Inconsistent shapes or lengths between related arguments."""


class ConditioningError(SpecpartError, RuntimeError):
    """A Gram matrix is too ill-conditioned to solve the projected problem."""


class SolverError(SpecpartError, RuntimeError):
    """Eigensolver could not continue. ``state`` holds the last valid iterate."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class AssignmentError(SpecpartError, RuntimeError):
    """Cluster assignment failed because the embedding is degenerate."""


class UndefinedMetricError(SpecpartError, ValueError):
    """The requested metric has an empty denominator for these partitions."""


class StreamStageError(SpecpartError, RuntimeError):
    """A stream stage failed. Carries the stage index and completed results."""

    def __init__(self, stage, cause, results=None):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.results = results if results is not None else []
        self.__cause__ = cause
