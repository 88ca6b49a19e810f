from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Callable, Optional

import pytest

from geobench.dataset import ImageRecord, Localizability
from geobench.gateway import ModelEndpoint, TransportError, TransportResponse
from geobench.metrics import GeoCoordinate
from geobench.services.clock import VirtualClock
from geobench.services.run_log import RunLog


class FakeTransport:
    """Scripted HTTP transport. Each script item is a status code, a (status, body) pair or an exception."""

    def __init__(self, script: list[Any], clock: Optional[VirtualClock] = None, answer: str = "Latitude and Longitude: 10, 20") -> None:
        self.script = list(script)
        self.clock = clock
        self.answer = answer
        self.calls: list[dict[str, Any]] = []

    def _ok_body(self) -> str:
        return json.dumps({"choices": [{"message": {"content": self.answer}}]})

    async def post(self, url, *, headers, payload, timeout) -> TransportResponse:
        self.calls.append(
            {"url": url, "headers": dict(headers), "payload": payload, "at": self.clock.now if self.clock else None}
        )
        item = self.script.pop(0) if self.script else 200
        if isinstance(item, Exception):
            raise item
        if isinstance(item, tuple):
            return TransportResponse(*item)
        return TransportResponse(item, self._ok_body() if item == 200 else '{"error": "x"}')


@pytest.fixture
def make_record() -> Callable[..., ImageRecord]:
    def factory(
        record_id: str = "r1",
        lat: float = 10.0,
        lon: float = 20.0,
        country: str = "FR",
        **kwargs: Any,
    ) -> ImageRecord:
        kwargs.setdefault("image_uri", f"https://img.example/{record_id}.jpg")
        return ImageRecord(id=record_id, truth=GeoCoordinate(lat, lon), country_code=country, **kwargs)

    return factory


@pytest.fixture
def synthetic_records(make_record) -> Callable[[int], list[ImageRecord]]:
    """Deterministic spread of records over the globe."""

    def factory(n: int) -> list[ImageRecord]:
        out = []
        for i in range(n):
            lat = -60.0 + (i * 37.0) % 130.0
            lon = -179.0 + (i * 71.3) % 358.0
            tag = list(Localizability)[i % len(Localizability)]
            out.append(make_record(f"rec{i:05d}", round(lat, 4), round(lon, 4), localizability=tag))
        return out

    return factory


@pytest.fixture
def oracle_endpoint() -> ModelEndpoint:
    return ModelEndpoint(name="oracle", base_url="mock:oracle")


@pytest.fixture
def http_endpoint() -> Callable[..., ModelEndpoint]:
    def factory(**kwargs: Any) -> ModelEndpoint:
        fields = {"name": "remote", "base_url": "https://api.example/v1", "model": "vlm-1"}
        fields.update(kwargs)
        return ModelEndpoint(**fields)

    return factory


@pytest.fixture
def clock() -> VirtualClock:
    return VirtualClock()


@pytest.fixture
def fake_transport() -> type[FakeTransport]:
    return FakeTransport


@pytest.fixture
def memory_log() -> RunLog:
    return RunLog(None)


@pytest.fixture
def transport_error() -> type[TransportError]:
    return TransportError


@pytest.fixture
def write_jsonl(tmp_path: Path) -> Callable[[str, list[dict]], Path]:
    def write(name: str, rows: list[dict]) -> Path:
        path = tmp_path / name
        path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
        return path

    return write
