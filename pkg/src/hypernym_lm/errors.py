"""Shared exception types.

Validation problems (bad config, inconsistent artifacts) map to CLI exit
code 1; everything else that escapes maps to exit code 2.
"""


class HypernymLmError(Exception):
    """Base class for all package errors."""


class ValidationError(HypernymLmError):
    """Bad user input: config values, mismatched artifacts, range errors."""


class ConfigError(ValidationError):
    """Invalid or inconsistent run configuration."""


class ConsistencyError(ValidationError):
    """Artifacts that should agree do not (hashes, vocab membership, ...)."""


class WordNetLoadError(HypernymLmError):
    """A database file is missing or unreadable."""


class WndbParseError(HypernymLmError):
    """A database record could not be parsed."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class TrainingDivergedError(HypernymLmError):
    """Loss became NaN/Inf during training."""
