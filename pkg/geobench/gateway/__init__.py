from .client import ModelGateway, backoff_delay
from .mocks import mock_noisy, mock_oracle, noisy_guess
from .models import ModelEndpoint, ModelReply, fingerprint, load_endpoints
from .transport import AiohttpTransport, Transport, TransportError, TransportResponse

__all__ = [
    "AiohttpTransport",
    "ModelEndpoint",
    "ModelGateway",
    "ModelReply",
    "Transport",
    "TransportError",
    "TransportResponse",
    "backoff_delay",
    "fingerprint",
    "load_endpoints",
    "mock_noisy",
    "mock_oracle",
    "noisy_guess",
]
