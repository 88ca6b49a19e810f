from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from geobench.dataset.records import ImageRecord, Localizability
from geobench.errors import (
    AuthFailure,
    ConfigError,
    ExhaustedRetries,
    GatewayError,
    ImageLoadError,
    MalformedEndpointResponse,
    RequestRejected,
)
from geobench.gateway import ModelEndpoint, ModelGateway, ModelReply
from geobench.metrics import EARTH, BoundaryLevel, EarthModel, GeoCoordinate, classify_boundary, geoscore, haversine_distance
from geobench.parser import parse_coordinates
from geobench.prompts import EVALUATION_KINDS, PromptStrategy, StrategyKind, render

logger = logging.getLogger(__name__)

_GATEWAY_REASONS: tuple[tuple[type[GatewayError], str], ...] = (
    (ExhaustedRetries, "exhausted_retries"),
    (AuthFailure, "auth_failure"),
    (MalformedEndpointResponse, "malformed_response"),
    (RequestRejected, "request_rejected"),
    (ImageLoadError, "image_load_error"),
)


def gateway_reason(exc: GatewayError) -> str:
    for cls, reason in _GATEWAY_REASONS:
        if isinstance(exc, cls):
            return reason
    return "gateway_error"


@dataclass(frozen=True)
class PredictionOutcome:
    """One (endpoint, strategy, record) prediction.

    `distance_km`, `geoscore` and `boundary` are set exactly when a coordinate
    was parsed. `failure` names why not: a parse failure or a gateway error.
    """

    record_id: str
    endpoint: str
    strategy: str
    truth: GeoCoordinate
    localizability: Localizability = Localizability.UNTAGGED
    raw_text: Optional[str] = None
    predicted: Optional[GeoCoordinate] = None
    distance_km: Optional[float] = None
    geoscore: Optional[float] = None
    boundary: Optional[BoundaryLevel] = None
    failure: Optional[str] = None
    gateway_error: bool = False
    candidates_found: int = 0
    latency_ms: float = 0.0
    attempts: int = 0
    cached: bool = False

    def __post_init__(self) -> None:
        scored = (self.distance_km, self.geoscore, self.boundary, self.predicted)
        if self.failure is None and any(v is None for v in scored):
            raise ValueError("a successful outcome needs prediction, distance, geoscore and boundary")
        if self.failure is not None and any(v is not None for v in scored):
            raise ValueError("a failed outcome carries no prediction scores")

    @property
    def ok(self) -> bool:
        return self.failure is None

    @property
    def sort_key(self) -> tuple[str, int, str, str]:
        return (self.endpoint, strategy_rank(self.strategy), self.strategy, self.record_id)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["truth"] = [self.truth.latitude, self.truth.longitude]
        data["predicted"] = [self.predicted.latitude, self.predicted.longitude] if self.predicted else None
        data["boundary"] = self.boundary.key if self.boundary else None
        data["localizability"] = self.localizability.value
        # reuse on resume must not change the persisted bytes
        del data["cached"]
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PredictionOutcome":
        predicted = data.get("predicted")
        boundary = data.get("boundary")
        return cls(
            record_id=data["record_id"],
            endpoint=data["endpoint"],
            strategy=data["strategy"],
            truth=GeoCoordinate(*data["truth"]),
            localizability=Localizability(data.get("localizability", Localizability.UNTAGGED.value)),
            raw_text=data.get("raw_text"),
            predicted=GeoCoordinate(*predicted) if predicted else None,
            distance_km=data.get("distance_km"),
            geoscore=data.get("geoscore"),
            boundary=BoundaryLevel[boundary.upper()] if boundary else None,
            failure=data.get("failure"),
            gateway_error=bool(data.get("gateway_error", False)),
            candidates_found=int(data.get("candidates_found", 0)),
            latency_ms=float(data.get("latency_ms", 0.0)),
            attempts=int(data.get("attempts", 0)),
        )


def strategy_rank(strategy: str) -> int:
    """Table order: zero-shot, few-shot, cot; anything else after them."""
    for i, kind in enumerate(StrategyKind):
        if kind.value == strategy:
            return i
    return len(StrategyKind)


def canonical_order(outcomes: Iterable[PredictionOutcome]) -> list[PredictionOutcome]:
    return sorted(outcomes, key=lambda o: o.sort_key)


def score_reply(
    record: ImageRecord,
    endpoint: str,
    strategy: str,
    reply: ModelReply,
    earth: EarthModel = EARTH,
) -> PredictionOutcome:
    parsed = parse_coordinates(reply.raw_text)
    common = dict(
        record_id=record.id,
        endpoint=endpoint,
        strategy=strategy,
        truth=record.truth,
        localizability=record.localizability,
        raw_text=reply.raw_text,
        candidates_found=parsed.candidates_found,
        latency_ms=reply.latency_ms,
        attempts=reply.attempt_count,
        cached=reply.cached,
    )
    if parsed.coordinate is None:
        return PredictionOutcome(failure=parsed.failure.value if parsed.failure else "no_candidate", **common)
    distance = haversine_distance(record.truth, parsed.coordinate, earth)
    return PredictionOutcome(
        predicted=parsed.coordinate,
        distance_km=distance,
        geoscore=geoscore(distance),
        boundary=classify_boundary(distance),
        **common,
    )


def failed_outcome(record: ImageRecord, endpoint: str, strategy: str, exc: GatewayError) -> PredictionOutcome:
    body = exc.body if isinstance(exc, MalformedEndpointResponse) else None
    return PredictionOutcome(
        record_id=record.id,
        endpoint=endpoint,
        strategy=strategy,
        truth=record.truth,
        localizability=record.localizability,
        raw_text=body,
        failure=gateway_reason(exc),
        gateway_error=True,
        attempts=exc.attempts,
    )


def _check_inputs(
    test_set: Sequence[ImageRecord],
    endpoints: Sequence[ModelEndpoint],
    strategies: Sequence[PromptStrategy],
) -> None:
    if not test_set:
        raise ConfigError("test set is empty")
    if not endpoints:
        raise ConfigError("no endpoints configured")
    if not strategies:
        raise ConfigError("no prompt strategies selected")
    for s in strategies:
        if s.kind not in EVALUATION_KINDS:
            raise ConfigError(f"{s.kind.value} is not an evaluation strategy")
    kinds = [s.kind for s in strategies]
    if len(set(kinds)) != len(kinds):
        raise ConfigError("each prompt strategy may appear once per campaign")
    names = [e.name for e in endpoints]
    if len(set(names)) != len(names):
        raise ConfigError("endpoint names must be unique within a campaign")
    ids = [r.id for r in test_set]
    if len(set(ids)) != len(ids):
        raise ConfigError("test set contains duplicate record ids")


async def run_campaign(
    test_set: Sequence[ImageRecord],
    endpoints: Sequence[ModelEndpoint],
    strategies: Sequence[PromptStrategy],
    gateway: ModelGateway,
    *,
    earth: EarthModel = EARTH,
) -> list[PredictionOutcome]:
    """Query every (endpoint, strategy, record) once and score the replies.

    Gateway failures become outcomes; only bad configuration raises.
    """
    _check_inputs(test_set, endpoints, strategies)
    logger.info(
        "Campaign: %d records x %d endpoints x %d strategies",
        len(test_set), len(endpoints), len(strategies),
    )

    async def one(endpoint: ModelEndpoint, strategy: PromptStrategy, record: ImageRecord) -> PredictionOutcome:
        prompt = render(strategy, record)
        try:
            reply = await gateway.query(endpoint, prompt)
        except GatewayError as exc:
            logger.warning("%s/%s on %s failed: %s", endpoint.name, strategy.kind.value, record.id, exc)
            return failed_outcome(record, endpoint.name, strategy.kind.value, exc)
        return score_reply(record, endpoint.name, strategy.kind.value, reply, earth)

    tasks = [one(e, s, r) for e in endpoints for s in strategies for r in test_set]
    outcomes = canonical_order(await asyncio.gather(*tasks))

    parsed = sum(1 for o in outcomes if o.ok)
    errored = sum(1 for o in outcomes if o.gateway_error)
    cached = sum(1 for o in outcomes if o.cached)
    logger.info(
        "Campaign finished: %d outcomes, %d parsed, %d parse failures, %d gateway errors, %d reused",
        len(outcomes), parsed, len(outcomes) - parsed - errored, errored, cached,
    )
    return outcomes


def write_outcomes(path: str | Path, outcomes: Iterable[PredictionOutcome]) -> int:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with out.open("w", encoding="utf-8", newline="\n") as handle:
        for o in outcomes:
            handle.write(json.dumps(o.to_dict(), ensure_ascii=False) + "\n")
            n += 1
    logger.info("Wrote %d outcomes to %s", n, out)
    return n


def read_outcomes(path: str | Path) -> list[PredictionOutcome]:
    src = Path(path)
    if not src.is_file():
        raise FileNotFoundError(f"outcomes file not found: {src}")
    rows: list[PredictionOutcome] = []
    with src.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                rows.append(PredictionOutcome.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"{src}: line {lineno}: not a valid outcome: {exc}") from exc
    return rows
