from __future__ import annotations

from typing import Optional


class GeoBenchError(Exception):
    """Base class for harness errors that should end a command with exit 1."""


class ConfigError(GeoBenchError):
    pass


class ManifestError(GeoBenchError):
    def __init__(self, message: str, *, line: Optional[int] = None, field: Optional[str] = None) -> None:
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field {field!r}: "
        super().__init__(prefix + message)


class EmbeddingError(GeoBenchError):
    def __init__(self, uri: str, reason: str) -> None:
        self.uri = uri
        self.reason = reason
        super().__init__(f"embedding failed for {uri}: {reason}")


class TemplateError(GeoBenchError):
    pass


class GatewayError(GeoBenchError):
    """A model query failed. `attempts` counts the requests that were sent."""

    def __init__(self, message: str, *, endpoint: str = "", attempts: int = 0) -> None:
        self.endpoint = endpoint
        self.attempts = attempts
        super().__init__(message)


class ExhaustedRetries(GatewayError):
    pass


class AuthFailure(GatewayError):
    pass


class RequestRejected(GatewayError):
    pass


class ImageLoadError(GatewayError):
    pass


class MalformedEndpointResponse(GatewayError):
    def __init__(self, message: str, *, body: str, endpoint: str = "", attempts: int = 0) -> None:
        self.body = body
        super().__init__(message, endpoint=endpoint, attempts=attempts)
