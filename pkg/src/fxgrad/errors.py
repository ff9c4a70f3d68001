"""Exception hierarchy shared by every fxgrad module."""
from __future__ import annotations

from typing import Optional


class FxgradError(Exception):
    """Base class for all errors raised by fxgrad."""


class ContractError(FxgradError):
    """A caller broke an interface contract (shape, length, finiteness, stale cache)."""


class DomainError(FxgradError, ValueError):
    """A value lies outside the mathematical domain of an operation."""


class ConfigError(FxgradError):
    """Invalid or inconsistent configuration. ``field`` names the offending path."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}" if field else message)


class WavParseError(FxgradError):
    """Malformed or unsupported RIFF/WAVE data."""

    def __init__(self, message: str, offset: int, chunk: Optional[str] = None):
        self.offset = offset
        self.chunk = chunk
        where = f" (chunk '{chunk}')" if chunk else ""
        super().__init__(f"{message}{where} at byte offset {offset}")


class TrainingAborted(FxgradError):
    """Every step of an epoch produced a non-finite loss."""
