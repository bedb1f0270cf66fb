"""Exception types shared across the package."""


class SparseGpError(Exception):
    """Base class for all package-specific errors."""


class SingularMatrix(SparseGpError):
    """Cholesky factorization failed even after jitter escalation."""


class DimensionMismatch(SparseGpError):
    """Array shapes do not conform for the requested operation."""


class NonPositiveV(SparseGpError):
    """A variational scale parameter v must be strictly positive."""


class NegativeCount(SparseGpError):
    """Count targets must be nonnegative integers."""


class IndexOutOfRange(SparseGpError):
    """A per-point index fell outside [0, N)."""


class EmptyBatch(SparseGpError):
    """A minibatch estimator needs at least one index."""


class MTooLarge(SparseGpError):
    """More cluster centers requested than available data points."""


class DatasetTooLarge(SparseGpError):
    """Exact GP refused: the training set exceeds the desk-scale guard."""


class NonFiniteObjective(SparseGpError):
    """The training objective evaluated to NaN or infinity."""


class ParseError(SparseGpError):
    """A data or config file could not be parsed."""


class EmptyDataset(SparseGpError):
    """No usable rows survived ingestion."""


class ConfigError(SparseGpError):
    """An experiment or training configuration is invalid."""
