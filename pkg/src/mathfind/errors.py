"""Exception types shared across the engine."""

from __future__ import annotations


class MathfindError(Exception):
    """Base class for all engine errors."""


class MalformedXml(MathfindError):
    """Raised for XML/MathML the strict island parser cannot accept.

    ``position`` is a byte offset into the parsed input.
    """

    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"malformed XML at byte {position}: {reason}")


class UnsupportedCommand(MathfindError):
    """A LaTeX command outside the supported query subset."""

    def __init__(self, command: str, position: int):
        self.command = command
        self.position = position
        super().__init__(f"unsupported LaTeX command {command!r} at offset {position}")


class UnbalancedGroup(MathfindError):
    """Unbalanced braces, fences, or math delimiters in a query fragment."""

    def __init__(self, position: int, detail: str = "unbalanced group"):
        self.position = position
        self.detail = detail
        super().__init__(f"{detail} at offset {position}")


class EmptyQuery(MathfindError):
    """Query contained no searchable terms after analysis."""


class IndexExists(MathfindError):
    """create_index target already holds data."""


class IndexCorrupt(MathfindError):
    """Manifest or segment failed a magic/version/size/checksum check."""


class IoFailure(MathfindError):
    """Filesystem operation failed (wraps the underlying OSError message)."""


class DocNotFound(MathfindError):
    """Requested document id is not in the index."""
