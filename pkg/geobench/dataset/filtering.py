"""Indoor-scene filtering from the similarity of four directional views."""
from __future__ import annotations

import asyncio
import itertools
import json
import logging
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Literal, Mapping, Optional, Protocol, Sequence

import aiohttp
import numpy as np

from geobench.errors import EmbeddingError, GeoBenchError

from .records import ImageRecord

logger = logging.getLogger(__name__)

DEFAULT_INDOOR_THRESHOLD = 0.8
# means this close to the threshold count as equal, not exceeding
THRESHOLD_TOLERANCE = 1e-9

Aggregation = Literal["mean", "min", "max"]


class FilterDecision(str, Enum):
    KEEP = "keep"
    EXCLUDE_INDOOR = "exclude_indoor"
    INAPPLICABLE = "inapplicable"


class EmbeddingVector:
    """Fixed-length, non-zero embedding."""

    __slots__ = ("values",)

    def __init__(self, components: Sequence[float] | np.ndarray) -> None:
        values = np.asarray(components, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("embedding must be a non-empty 1-d vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("embedding components must be finite")
        if not np.any(values):
            raise ValueError("embedding must not be all-zero")
        self.values = values

    @property
    def dimension(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.dimension


def _as_array(vec: EmbeddingVector | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(vec, EmbeddingVector):
        return vec.values
    return np.asarray(vec, dtype=float)


def cosine_similarity(
    a: EmbeddingVector | Sequence[float] | np.ndarray,
    b: EmbeddingVector | Sequence[float] | np.ndarray,
) -> float:
    va, vb = _as_array(a), _as_array(b)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for a zero-norm vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


class EmbeddingProvider(Protocol):
    # "image" when vectors embed the pixels, "caption" when they embed generated captions
    source: str

    async def embed(self, uri: str) -> EmbeddingVector: ...


class TableEmbeddingProvider:
    """Embeddings looked up from a precomputed {uri: vector} table."""

    def __init__(self, table: Mapping[str, Sequence[float]], *, source: str = "image") -> None:
        self._table = {uri: EmbeddingVector(vec) for uri, vec in table.items()}
        self.source = source

    @classmethod
    def from_json(cls, path: str | Path, *, source: str = "image") -> "TableEmbeddingProvider":
        p = Path(path)
        if not p.is_file():
            raise GeoBenchError(f"embedding table not found: {p}")
        with p.open("r", encoding="utf-8") as handle:
            data = json.load(handle)
        if not isinstance(data, dict):
            raise GeoBenchError(f"embedding table {p} must be a JSON object of uri -> vector")
        return cls(data, source=source)

    async def embed(self, uri: str) -> EmbeddingVector:
        try:
            return self._table[uri]
        except KeyError:
            raise EmbeddingError(uri, "no embedding in table") from None


class HttpEmbeddingProvider:
    """Remote embedding/captioning service.

    POSTs {"image_uri": uri} and expects {"embedding": [...]}.
    """

    def __init__(
        self,
        url: str,
        *,
        token_env: Optional[str] = None,
        source: str = "image",
        timeout: float = 30.0,
        session: Optional[aiohttp.ClientSession] = None,
    ) -> None:
        self.url = url
        self.source = source
        self._token_env = token_env
        self._timeout = aiohttp.ClientTimeout(total=timeout)
        self._session = session
        self._owns_session = session is None

    async def _get_session(self) -> aiohttp.ClientSession:
        if self._session is None:
            self._session = aiohttp.ClientSession(timeout=self._timeout)
        return self._session

    async def close(self) -> None:
        if self._session is not None and self._owns_session:
            await self._session.close()
            self._session = None

    async def embed(self, uri: str) -> EmbeddingVector:
        headers = {}
        if self._token_env:
            token = os.environ.get(self._token_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        session = await self._get_session()
        try:
            async with session.post(self.url, json={"image_uri": uri}, headers=headers) as resp:
                if resp.status != 200:
                    raise EmbeddingError(uri, f"HTTP {resp.status}")
                body = await resp.json(content_type=None)
        except (aiohttp.ClientError, asyncio.TimeoutError) as exc:
            raise EmbeddingError(uri, f"{type(exc).__name__}: {exc}") from exc
        try:
            return EmbeddingVector(body["embedding"])
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbeddingError(uri, f"malformed embedding response: {exc}") from exc


def aggregate_similarity(similarities: Sequence[float], aggregation: Aggregation = "mean") -> float:
    if not similarities:
        raise ValueError("no similarities to aggregate")
    arr = np.asarray(similarities, dtype=float)
    if aggregation == "mean":
        return float(np.mean(arr))
    if aggregation == "min":
        return float(np.min(arr))
    if aggregation == "max":
        return float(np.max(arr))
    raise ValueError(f"unknown aggregation {aggregation!r}")


def pairwise_similarities(vectors: Sequence[EmbeddingVector]) -> list[float]:
    dims = {v.dimension for v in vectors}
    if len(dims) > 1:
        raise ValueError(f"views have mixed embedding dimensions: {sorted(dims)}")
    return [cosine_similarity(a, b) for a, b in itertools.combinations(vectors, 2)]


async def indoor_filter(
    record: ImageRecord,
    embed: EmbeddingProvider,
    threshold: float = DEFAULT_INDOOR_THRESHOLD,
    aggregation: Aggregation = "mean",
) -> FilterDecision:
    if record.views is None:
        return FilterDecision.INAPPLICABLE
    vectors = []
    for uri in record.views:
        try:
            vectors.append(await embed.embed(uri))
        except EmbeddingError:
            raise
        except Exception as exc:
            raise EmbeddingError(uri, f"{type(exc).__name__}: {exc}") from exc
    score = aggregate_similarity(pairwise_similarities(vectors), aggregation)
    if score - threshold > THRESHOLD_TOLERANCE:
        return FilterDecision.EXCLUDE_INDOOR
    return FilterDecision.KEEP


@dataclass(frozen=True)
class FilterResult:
    record: ImageRecord
    decision: Optional[FilterDecision]
    error: Optional[str] = None

    @property
    def kept(self) -> bool:
        return self.decision in (FilterDecision.KEEP, FilterDecision.INAPPLICABLE)


async def filter_records(
    records: Sequence[ImageRecord],
    embed: EmbeddingProvider,
    *,
    threshold: float = DEFAULT_INDOOR_THRESHOLD,
    aggregation: Aggregation = "mean",
    concurrency: int = 4,
) -> list[FilterResult]:
    """Run the indoor filter over many records; results come back ordered by record id."""
    sem = asyncio.Semaphore(max(1, concurrency))
    logger.info(
        "Indoor filter: %d records, threshold=%s, aggregation=%s, embedding source=%s",
        len(records), threshold, aggregation, getattr(embed, "source", "unknown"),
    )

    async def one(record: ImageRecord) -> FilterResult:
        async with sem:
            try:
                decision = await indoor_filter(record, embed, threshold, aggregation)
            except EmbeddingError as exc:
                logger.warning("Indoor filter failed for %s: %s", record.id, exc)
                return FilterResult(record, None, str(exc))
            return FilterResult(record, decision)

    results = await asyncio.gather(*(one(r) for r in records))
    results.sort(key=lambda r: r.record.id)
    excluded = sum(1 for r in results if r.decision is FilterDecision.EXCLUDE_INDOOR)
    failed = sum(1 for r in results if r.error is not None)
    logger.info("Indoor filter done: %d excluded, %d failed", excluded, failed)
    return results
