from __future__ import annotations

import asyncio
import logging
import os
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from geobench.db import ReplyStore, StoredReply
from geobench.errors import (
    AuthFailure,
    ExhaustedRetries,
    ImageLoadError,
    MalformedEndpointResponse,
    RequestRejected,
)
from geobench.prompts import RenderedPrompt
from geobench.services.clock import Clock, SystemClock
from geobench.services.rate_limit import SlidingWindowLimiter
from geobench.services.run_log import RunLog, RunLogEntry

from .mocks import mock_noisy, mock_oracle
from .models import ModelEndpoint, ModelReply, fingerprint
from .transport import AiohttpTransport, Transport, TransportError, build_request, parse_response

logger = logging.getLogger(__name__)

BACKOFF_INITIAL = 1.0
BACKOFF_FACTOR = 2.0
BACKOFF_CAP = 60.0
BACKOFF_JITTER = 0.2

_RETRYABLE_STATUS = frozenset({408, 429})


def backoff_delay(attempt: int, jitter: float = 1.0) -> float:
    """Delay after the `attempt`-th failed request (1-based); the cap bounds the jittered value."""
    base = BACKOFF_INITIAL * BACKOFF_FACTOR ** (attempt - 1)
    return min(BACKOFF_CAP, base * jitter)


@dataclass
class _EndpointSlot:
    in_flight: asyncio.Semaphore
    limiter: SlidingWindowLimiter


class ModelGateway:
    """Sends rendered prompts to endpoints; mock endpoints are answered in-process.

    Every query that reaches an endpoint (or fails before it) leaves run-log
    lines: one per HTTP attempt, one for a mock answer. Replies served from the
    store on resume leave none.
    """

    def __init__(
        self,
        run_log: RunLog,
        *,
        store: Optional[ReplyStore] = None,
        resume: bool = False,
        transport: Optional[Transport] = None,
        clock: Optional[Clock] = None,
        jitter_seed: Optional[int] = None,
        environ: Optional[Mapping[str, str]] = None,
    ) -> None:
        self.run_log = run_log
        self.store = store
        self.resume = resume
        self.mock_calls: Counter[str] = Counter()
        self._transport = transport
        self._clock = clock or SystemClock()
        self._rng = np.random.default_rng(jitter_seed)
        self._environ = environ if environ is not None else os.environ
        self._slots: dict[str, _EndpointSlot] = {}

    def _slot(self, endpoint: ModelEndpoint) -> _EndpointSlot:
        slot = self._slots.get(endpoint.name)
        if slot is None:
            slot = _EndpointSlot(
                in_flight=asyncio.Semaphore(endpoint.max_in_flight),
                limiter=SlidingWindowLimiter(endpoint.requests_per_minute, clock=self._clock),
            )
            self._slots[endpoint.name] = slot
        return slot

    def _get_transport(self) -> Transport:
        if self._transport is None:
            self._transport = AiohttpTransport()
        return self._transport

    async def close(self) -> None:
        close = getattr(self._transport, "close", None)
        if close is not None:
            await close()

    async def _log(
        self,
        endpoint: ModelEndpoint,
        fp: str,
        status: str,
        *,
        latency_ms: float = 0.0,
        attempt: int = 0,
        raw_text: Optional[str] = None,
        error: Optional[str] = None,
    ) -> None:
        await self.run_log.append(
            RunLogEntry(
                endpoint=endpoint.name,
                fingerprint=fp,
                status=status,
                latency_ms=latency_ms,
                attempt=attempt,
                temperature=endpoint.temperature,
                prompt_role=endpoint.prompt_role,
                raw_text=raw_text,
                error=error,
            )
        )

    async def _remember(self, reply: ModelReply) -> None:
        if self.store is None:
            return
        await self.store.put_reply(
            StoredReply(reply.endpoint, reply.fingerprint, reply.raw_text, reply.latency_ms, reply.attempt_count)
        )

    async def query(self, endpoint: ModelEndpoint, prompt: RenderedPrompt) -> ModelReply:
        fp = fingerprint(prompt)

        if self.resume and self.store is not None:
            stored = await self.store.get_reply(endpoint.name, fp)
            if stored is not None:
                logger.debug("Reusing stored reply for %s/%s", endpoint.name, fp[:12])
                return ModelReply(
                    raw_text=stored.raw_text,
                    latency_ms=stored.latency_ms,
                    attempt_count=stored.attempt_count,
                    endpoint=endpoint.name,
                    fingerprint=fp,
                    cached=True,
                )

        if endpoint.is_mock:
            reply = self._query_mock(endpoint, prompt, fp)
            await self._log(endpoint, fp, "ok", attempt=1, raw_text=reply.raw_text)
        else:
            reply = await self._query_http(endpoint, prompt, fp)
        await self._remember(reply)
        return reply

    def _query_mock(self, endpoint: ModelEndpoint, prompt: RenderedPrompt, fp: str) -> ModelReply:
        self.mock_calls[endpoint.name] += 1
        if endpoint.mock_kind == "noisy":
            return mock_noisy(prompt.image, endpoint.seed, endpoint.sigma_km, endpoint=endpoint.name, fingerprint=fp)
        return mock_oracle(prompt.image, endpoint=endpoint.name, fingerprint=fp)

    async def _query_http(self, endpoint: ModelEndpoint, prompt: RenderedPrompt, fp: str) -> ModelReply:
        headers: dict[str, str] = {}
        if endpoint.auth_token_env:
            token = self._environ.get(endpoint.auth_token_env)
            if not token:
                await self._log(endpoint, fp, "auth_failure", error=f"{endpoint.auth_token_env} is not set")
                raise AuthFailure(
                    f"environment variable {endpoint.auth_token_env} is not set", endpoint=endpoint.name
                )
            headers["Authorization"] = f"Bearer {token}"

        try:
            url, payload = build_request(endpoint, prompt.text, prompt.image.image_uri)
        except ImageLoadError as exc:
            exc.endpoint = endpoint.name
            await self._log(endpoint, fp, "image_error", error=str(exc))
            raise

        slot = self._slot(endpoint)
        transport = self._get_transport()
        last_error = ""
        attempts = endpoint.max_retries + 1

        async with slot.in_flight:
            for attempt in range(1, attempts + 1):
                await slot.limiter.acquire()
                started = self._clock.monotonic()
                try:
                    response = await transport.post(url, headers=headers, payload=payload, timeout=endpoint.timeout)
                except TransportError as exc:
                    latency = (self._clock.monotonic() - started) * 1000.0
                    last_error = str(exc)
                    await self._log(endpoint, fp, "transport_error", latency_ms=latency, attempt=attempt, error=last_error)
                else:
                    latency = (self._clock.monotonic() - started) * 1000.0
                    status = response.status
                    if 200 <= status < 300:
                        try:
                            text = parse_response(endpoint, response.body)
                        except MalformedEndpointResponse as exc:
                            exc.attempts = attempt
                            await self._log(
                                endpoint, fp, "malformed", latency_ms=latency, attempt=attempt,
                                raw_text=response.body, error=str(exc),
                            )
                            raise
                        await self._log(endpoint, fp, "ok", latency_ms=latency, attempt=attempt, raw_text=text)
                        return ModelReply(text, latency, attempt, endpoint.name, fp)

                    last_error = f"HTTP {status}"
                    await self._log(
                        endpoint, fp, f"http_{status}", latency_ms=latency, attempt=attempt,
                        raw_text=response.body, error=last_error,
                    )
                    if status in (401, 403):
                        raise AuthFailure(
                            f"{endpoint.name} rejected credentials (HTTP {status})",
                            endpoint=endpoint.name,
                            attempts=attempt,
                        )
                    if status not in _RETRYABLE_STATUS and status < 500:
                        raise RequestRejected(
                            f"{endpoint.name} rejected the request (HTTP {status})",
                            endpoint=endpoint.name,
                            attempts=attempt,
                        )

                if attempt < attempts:
                    delay = backoff_delay(attempt, float(self._rng.uniform(1 - BACKOFF_JITTER, 1 + BACKOFF_JITTER)))
                    logger.warning(
                        "%s attempt %d/%d failed (%s); retrying in %.2fs",
                        endpoint.name, attempt, attempts, last_error, delay,
                    )
                    await self._clock.sleep(delay)

        raise ExhaustedRetries(
            f"{endpoint.name} failed after {attempts} attempts: {last_error}",
            endpoint=endpoint.name,
            attempts=attempts,
        )