"""Exception types shared across the package."""


class MimoMCError(Exception):
    """Base class for all package errors."""


class ConfigError(MimoMCError, ValueError):
    """Invalid or inconsistent configuration (shapes, unsupported sizes)."""


class DomainError(MimoMCError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class DecodeError(MimoMCError, ValueError):
    """Malformed forwarded-sample stream.

    ``offset`` is the byte position at which decoding failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
