# errors.py
# Exception hierarchy for a11yfix. Every error the CLI can surface carries its exit code.


class A11yFixError(Exception):
    """Base class for all a11yfix errors."""

    exit_code = 1


# --- Configuration ---

class ConfigError(A11yFixError):
    """Invalid run configuration, config file or provider settings."""

    exit_code = 2


class ChunkBudgetError(ConfigError):
    """Chunk budget below the smallest representable chunk."""


class PriceLookupError(ConfigError, KeyError):
    """A model id has no entry in the price table."""

    def __str__(self):
        return Exception.__str__(self)


# --- Dataset / inputs ---

class DatasetError(A11yFixError):
    """Dataset layout problems and unreadable inputs."""

    exit_code = 3


class OrphanFileError(DatasetError):
    """A fixed file has no counterpart in the violated directory."""

    def __init__(self, filename: str):
        self.filename = filename
        super().__init__(f"Orphan fixed file without a violated counterpart: {filename}")


class LedgerError(DatasetError):
    """A usage ledger could not be read."""


class EmptyResultsError(DatasetError):
    """An output directory holds no per-file reports."""


class SizeLimitError(DatasetError, ValueError):
    """An HTML document exceeds the configured maximum size."""


# --- Provider ---

class ProviderError(A11yFixError):
    """The LLM provider failed to return a completion."""

    exit_code = 4


class ParseFailureError(ProviderError):
    """A completion could not be parsed after all retries."""

    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(message)


# --- Run outcome ---

class PartialFailureError(A11yFixError):
    """A command completed but some files failed; reports were still written."""

    exit_code = 5

    def __init__(self, message: str, failed_files=None):
        self.failed_files = list(failed_files or [])
        super().__init__(message)


# --- Library level ---

class RuleLookupError(A11yFixError, KeyError):
    """A rule id is not in the registry."""

    def __str__(self):
        return Exception.__str__(self)


class ExtractionError(A11yFixError):
    """No HTML could be extracted from a completion."""


class MetricsInputError(A11yFixError, ValueError):
    """Metric inputs are empty, mismatched or unpaired."""
