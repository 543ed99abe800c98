"""Exception types shared across the toolkit.

The command-line layer maps these onto process exit codes: ParseError -> 2,
I/O errors -> 3, FormatError -> 4, IntegrityError -> 5, anything else -> 1.
"""


class CenterkitError(Exception):
    """Base class for toolkit errors."""


class ParseError(CenterkitError):
    """Malformed textual input (JSON document, JSON line, config file)."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class FormatError(CenterkitError):
    """A binary raster file violates the container format."""


class IntegrityError(CenterkitError):
    """A cross-reference does not resolve (unknown image or category id)."""
