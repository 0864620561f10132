"""Exception hierarchy shared across the stack."""


class RagscopeError(Exception):
    """Base class for all errors raised by this package."""


class IngestError(RagscopeError):
    """Corpus ingestion failed. Message names the offending line."""


class DocumentNotFoundError(RagscopeError):
    """Requested doc_id is outside the stored corpus."""


class InvalidInputError(RagscopeError):
    """Caller violated an argument contract (empty text, bad dimension, ...)."""


class TransportError(RagscopeError):
    """A remote dependency could not be reached.

    ``kind`` distinguishes "timeout" from "refused" so callers can tell a
    slow service from a dead one.
    """

    def __init__(self, message: str, kind: str = "refused"):
        super().__init__(message)
        self.kind = kind


class IndexFormatError(RagscopeError):
    """Index file has the wrong magic bytes or an unsupported version."""


class IndexCorruptError(RagscopeError):
    """Index file is truncated or internally inconsistent."""


class RetrievalUnavailableError(RagscopeError):
    """Every retrieval worker failed; no hits can be produced."""


class GenerationError(RagscopeError):
    """The model backend produced no usable output."""


class ProtocolError(RagscopeError):
    """A remote backend answered with a shape that contradicts its declaration."""


class ConfigError(RagscopeError):
    """Deployment configuration is missing or inconsistent."""
