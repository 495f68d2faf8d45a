"""Exception hierarchy.

Each class carries a short ``category`` string that the CLI prints as the
machine-parsable prefix of its one-line error report.
"""


class RevsentError(Exception):
    category = "error"


class DataError(RevsentError, ValueError):
    """Malformed or invalid input records/files."""

    category = "data"


class ConfigError(RevsentError, ValueError):
    """Invalid configuration or flag combination."""

    category = "config"


class ShapeError(RevsentError, ValueError):
    """Tensor or feature shapes that do not line up."""

    category = "shape"


class TrainingError(RevsentError, RuntimeError):
    """Numerical failure during optimisation (NaN loss or gradient)."""

    category = "training"


class NotFittedError(RevsentError, RuntimeError):
    category = "not_fitted"
