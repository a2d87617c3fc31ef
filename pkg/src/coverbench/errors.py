"""Exception types shared across the toolkit.

The CLI maps each class to a distinct exit code, so stages should raise the
most specific type that applies.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class MissingInputError(ToolkitError):
    """A required input file or directory does not exist."""


class SchemaError(ToolkitError):
    """A file violates its declared schema (columns, types, vocabulary)."""


class DataMismatchError(ToolkitError):
    """Inputs are individually valid but inconsistent with each other."""


class ConfigError(ToolkitError):
    """A configuration value violates its declared constraints."""


class MatcherError(ToolkitError):
    """An external or built-in text matcher failed or returned bad output."""


class MissingEmbeddingError(DataMismatchError):
    """A video id has no row in the embedding store."""


class LockError(ToolkitError):
    """An advisory lock on a store path is already held."""
