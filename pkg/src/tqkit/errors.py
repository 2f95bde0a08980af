"""Shared exception hierarchy. Every tqkit error derives from TqkError."""


class TqkError(Exception):
    """Base class for all toolkit errors."""


class EmptyTableError(TqkError):
    """Raised when an operation requires a table with at least one row and column."""
