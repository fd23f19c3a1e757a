"""Exception types raised across the library."""

from __future__ import annotations


class MaskschedError(Exception):
    """Base class for all library errors."""


class DomainError(MaskschedError):
    """A parameter value is outside its documented domain."""


class PositionRangeError(MaskschedError):
    """A sequence position index is out of range."""


class InvariantViolation(MaskschedError):
    """Internal decoding invariant broken; indicates a scheduler bug."""


class EmptyQueryError(MaskschedError):
    """A denoiser was queried on a state with no masked positions."""


class ProtocolError(MaskschedError):
    """External denoiser protocol failure; carries the underlying cause."""


class SpawnError(ProtocolError):
    """The external adapter process could not be started."""


class HandshakeTimeoutError(ProtocolError):
    """The external adapter did not answer the handshake in time."""


class VersionMismatchError(ProtocolError):
    """The external adapter speaks a different protocol version."""


class UndefinedMetricError(MaskschedError):
    """A metric was requested for inputs on which it is undefined."""


class InsufficientTraceError(MaskschedError):
    """A trace lacks the score snapshots needed for the requested metric."""
