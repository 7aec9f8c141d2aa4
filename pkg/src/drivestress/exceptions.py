"""Exception hierarchy. The CLI maps each class onto a process exit code."""


class DriveStressError(Exception):
    exit_code = 1


class DataError(DriveStressError, ValueError):
    """Malformed, missing or degenerate input data."""

    exit_code = 1


class WindowRejected(DataError):
    """A window could not produce a complete feature vector.

    ``reason`` names the category and feature that failed, e.g.
    ``"time-domain: too few intervals"``.
    """

    def __init__(self, reason, feature=None):
        super().__init__(reason)
        self.reason = reason
        self.feature = feature


class ConfigError(DriveStressError, ValueError):
    exit_code = 2


class InvariantViolation(DriveStressError, AssertionError):
    """An internal guarantee was broken (e.g. a record straddling CV folds)."""

    exit_code = 3
