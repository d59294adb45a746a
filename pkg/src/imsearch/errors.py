"""Structured error hierarchy shared by the engine, service, and CLI.

Every error carries a stable ``code`` (its class name) so the HTTP layer
can emit ``{code, message, stage?}`` JSON bodies and the CLI can exit
non-zero with a one-line message.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all structured engine errors."""

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict:
        body = {"code": self.code, "message": self.message}
        if self.stage is not None:
            body["stage"] = self.stage
        return body


class ConfigError(EngineError):
    """Invalid pipeline configuration (bounds, missing endpoints)."""


class QueryValidationError(EngineError):
    """Base for query shape violations; maps to HTTP 422."""


class MissingReference(QueryValidationError):
    """CIR query without a reference image."""


class UnexpectedReference(QueryValidationError):
    """TIR query carrying a reference image."""


class EmptyText(QueryValidationError):
    """Query with no usable language input."""


class TemplateError(EngineError):
    """Prompt rendering left a placeholder unfilled or got empty input."""


class EmptyDecomposition(EngineError):
    """Prompt2 rendering asked for zero atomic instructions."""


class BackendUnavailable(EngineError):
    """Transport to a model backend failed after retries."""


class Timeout(BackendUnavailable):
    """A backend call exceeded its deadline after retries."""


class MalformedResponse(EngineError):
    """A backend returned a body that does not match the wire schema."""


class DimensionMismatch(EngineError):
    """An embedding's dimensionality disagrees with the configured d."""


class ParseError(EngineError):
    """Model output could not be parsed into the expected structure."""


class AmbiguousAnswer(ParseError):
    """A yes/no response contained neither token."""


class CorruptIndex(EngineError):
    """Index file failed its magic/version/checksum/consistency checks."""


class MissingSubset(EngineError):
    """Subset-restricted metric invoked without a usable subset group."""


class SessionNotFound(EngineError):
    """Unknown session id."""


class IngestInProgress(EngineError):
    """A second ingest was requested while one is running; maps to 409."""
