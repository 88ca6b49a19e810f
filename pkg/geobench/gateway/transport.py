from __future__ import annotations

import asyncio
import base64
import json
import logging
import mimetypes
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Protocol
from urllib.parse import urlparse

import aiohttp

from geobench.errors import ImageLoadError, MalformedEndpointResponse

from .models import ModelEndpoint

logger = logging.getLogger(__name__)


class TransportError(Exception):
    """Connection-level failure (timeout, reset, DNS); always retryable."""


@dataclass(frozen=True)
class TransportResponse:
    status: int
    body: str


class Transport(Protocol):
    async def post(
        self,
        url: str,
        *,
        headers: Mapping[str, str],
        payload: Mapping[str, Any],
        timeout: float,
    ) -> TransportResponse: ...


class AiohttpTransport:
    def __init__(self, session: Optional[aiohttp.ClientSession] = None) -> None:
        self._session = session
        self._owns_session = session is None

    async def _get_session(self) -> aiohttp.ClientSession:
        if self._session is None:
            self._session = aiohttp.ClientSession()
        return self._session

    async def post(
        self,
        url: str,
        *,
        headers: Mapping[str, str],
        payload: Mapping[str, Any],
        timeout: float,
    ) -> TransportResponse:
        session = await self._get_session()
        try:
            async with session.post(
                url,
                json=payload,
                headers=dict(headers),
                timeout=aiohttp.ClientTimeout(total=timeout),
            ) as resp:
                return TransportResponse(resp.status, await resp.text())
        except (aiohttp.ClientError, asyncio.TimeoutError) as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc

    async def close(self) -> None:
        if self._session is not None and self._owns_session:
            await self._session.close()
            self._session = None


def encode_image(uri: str) -> tuple[str, str]:
    """Return (url_for_request, raw_base64). Remote URLs pass through untouched."""
    parsed = urlparse(uri)
    if parsed.scheme in ("http", "https"):
        return uri, ""
    path = Path(parsed.path if parsed.scheme == "file" else uri)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageLoadError(f"cannot read image {uri}: {exc}") from exc
    media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
    encoded = base64.b64encode(data).decode("ascii")
    return f"data:{media_type};base64,{encoded}", encoded


def build_request(endpoint: ModelEndpoint, text: str, image_uri: str) -> tuple[str, dict[str, Any]]:
    image_url, image_b64 = encode_image(image_uri)
    base = endpoint.base_url.rstrip("/")

    if endpoint.adapter == "ollama":
        user: dict[str, Any] = {"role": "user", "content": "" if endpoint.prompt_role == "system" else text}
        if image_b64:
            user["images"] = [image_b64]
        messages = [user]
        if endpoint.prompt_role == "system":
            messages.insert(0, {"role": "system", "content": text})
        payload = {
            "model": endpoint.model,
            "stream": False,
            "options": {"temperature": endpoint.temperature},
            "messages": messages,
        }
        return f"{base}/api/chat", payload

    image_part = {"type": "image_url", "image_url": {"url": image_url}}
    if endpoint.prompt_role == "system":
        messages = [
            {"role": "system", "content": text},
            {"role": "user", "content": [image_part]},
        ]
    else:
        messages = [{"role": "user", "content": [{"type": "text", "text": text}, image_part]}]
    payload = {"model": endpoint.model, "temperature": endpoint.temperature, "messages": messages}
    return f"{base}/chat/completions", payload


def parse_response(endpoint: ModelEndpoint, body: str) -> str:
    try:
        data = json.loads(body)
        if endpoint.adapter == "ollama":
            content = data["message"]["content"]
        else:
            content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedEndpointResponse(
            f"unexpected response shape from {endpoint.name}: {exc!r}", body=body, endpoint=endpoint.name
        ) from exc
    if isinstance(content, list):
        # content-part arrays: keep the text parts in order
        content = "".join(part.get("text", "") for part in content if isinstance(part, dict))
    if not isinstance(content, str):
        raise MalformedEndpointResponse(
            f"response content from {endpoint.name} is not text", body=body, endpoint=endpoint.name
        )
    return content
