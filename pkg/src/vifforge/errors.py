"""Shared exception hierarchy.

Every error raised by this package derives from ForgeError so the CLI can map
failures to its exit-code contract (0 ok, 1 runtime, 2 usage).
"""

from __future__ import annotations


class ForgeError(Exception):
    """Base class for all package errors."""


class ContractError(ForgeError):
    """A caller violated an operation's precondition or type contract."""


class SchemaError(ForgeError):
    """Structured data exists but does not match the required shape."""


class ParseError(ForgeError):
    """Input could not be parsed at all.

    ``line`` is 1-based when the input is line-oriented, ``index`` is the
    0-based record index, ``offset`` a byte/character offset; each is set
    only when it is meaningful for the input at hand.
    """

    def __init__(
        self,
        message: str,
        *,
        line: int | None = None,
        index: int | None = None,
        offset: int | None = None,
    ) -> None:
        super().__init__(message)
        self.line = line
        self.index = index
        self.offset = offset


class ConflictError(ForgeError):
    """A uniqueness or write-once rule was violated (duplicate id, double submit)."""


class NotFoundError(ForgeError):
    """A referenced entity does not exist."""


class TransportError(ForgeError):
    """A backend call failed for reasons worth retrying."""

    def __init__(self, message: str, *, attempts: int = 1) -> None:
        super().__init__(message)
        self.attempts = attempts


class BackendTimeoutError(TransportError):
    """A backend call exceeded its deadline."""


class RefusalError(ForgeError):
    """The backend refused to answer; carries the backend's own message."""

    def __init__(self, message: str, *, backend_message: str = "") -> None:
        super().__init__(message)
        self.backend_message = backend_message or message


class ReplyFormatError(ForgeError):
    """A judge reply could not be mapped to a verdict; carries the raw reply."""

    def __init__(self, message: str, *, raw_reply: str = "") -> None:
        super().__init__(message)
        self.raw_reply = raw_reply
