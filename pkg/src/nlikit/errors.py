"""Shared exception types."""

from __future__ import annotations


class NlikitError(Exception):
    """Base class for errors raised by this package."""


class ParseError(NlikitError):
    """Malformed input that cannot be parsed. Carries a 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None) -> None:
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ValidationError(NlikitError):
    """Structurally parseable input that violates a document or dataset invariant."""


class DataError(NlikitError):
    """Data unsuitable for the requested operation (missing layers, bad sizes)."""
