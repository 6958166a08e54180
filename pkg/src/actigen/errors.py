"""Exception hierarchy shared across the package."""


class ActigenError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ActigenError, ValueError):
    """Invalid configuration value, file, or grammar definition."""


class IngestError(ActigenError, ValueError):
    """Malformed survey input; carries file/line context in the message."""


class BalanceError(ActigenError, ValueError):
    """Infeasible or degenerate balancing problem."""


class TrainError(ActigenError, RuntimeError):
    """Training diverged or was otherwise aborted."""


class CheckpointError(ActigenError, ValueError):
    """Unreadable or corrupt model checkpoint."""


class AssignmentError(ActigenError, ValueError):
    """Location assignment could not be carried out."""
