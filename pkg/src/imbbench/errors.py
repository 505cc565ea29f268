"""Exception types raised across the package."""


class ImbBenchError(Exception):
    """Base class for all package errors."""


class InvalidDatasetError(ImbBenchError):
    """Dataset violates a precondition (single class, shape mismatch, non-finite values)."""


class CSVParseError(ImbBenchError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class InvalidSplitError(ImbBenchError):
    """A class is too small to be represented on both sides of a split."""


class ResampleError(ImbBenchError):
    """A resampling method cannot produce output for the given data and parameters."""


class UndefinedMetricError(ImbBenchError):
    """A metric is undefined for the given predictions (e.g. a single class)."""


class FitError(ImbBenchError):
    """A learner could not be fitted."""


class ResampleWarning(UserWarning):
    """Resampler finished, but the output is degenerate (e.g. majority emptied)."""
