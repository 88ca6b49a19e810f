"""In-process test doubles standing in for model endpoints. No network access."""
from __future__ import annotations

import hashlib

import numpy as np

from geobench.dataset.records import ImageRecord
from geobench.metrics import GeoCoordinate, destination_point, format_coordinate
from geobench.prompts import ANSWER_LABEL

from .models import ModelReply

ORACLE_ENDPOINT = "mock:oracle"
NOISY_ENDPOINT = "mock:noisy"

_ANSWER_TEMPLATE = (
    "The scene was examined for vegetation, road markings, signage and architecture.\n"
    "{label}{coords}"
)

# noisy offsets never exceed this many sigmas
NOISE_CLAMP_SIGMAS = 3.0


def _answer(coord: GeoCoordinate) -> str:
    return _ANSWER_TEMPLATE.format(label=ANSWER_LABEL, coords=format_coordinate(coord))


def mock_oracle(record: ImageRecord, *, endpoint: str = ORACLE_ENDPOINT, fingerprint: str = "") -> ModelReply:
    """Answers with the exact ground truth."""
    return ModelReply(
        raw_text=_answer(record.truth),
        latency_ms=0.0,
        attempt_count=1,
        endpoint=endpoint,
        fingerprint=fingerprint,
    )


def _record_seed(record_id: str, seed: int) -> int:
    digest = hashlib.sha256(f"{seed}\x1f{record_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def noisy_guess(record: ImageRecord, seed: int, sigma_km: float) -> GeoCoordinate:
    """Truth displaced by a Rayleigh(sigma) distance, clamped at 3 sigma, on a uniform bearing."""
    if sigma_km < 0:
        raise ValueError("sigma_km must be non-negative")
    if sigma_km == 0:
        return record.truth
    rng = np.random.default_rng(_record_seed(record.id, seed))
    distance = min(float(rng.rayleigh(sigma_km)), NOISE_CLAMP_SIGMAS * sigma_km)
    bearing = float(rng.uniform(0.0, 360.0))
    return destination_point(record.truth, distance, bearing)


def mock_noisy(
    record: ImageRecord,
    seed: int,
    sigma_km: float,
    *,
    endpoint: str = NOISY_ENDPOINT,
    fingerprint: str = "",
) -> ModelReply:
    return ModelReply(
        raw_text=_answer(noisy_guess(record, seed, sigma_km)),
        latency_ms=0.0,
        attempt_count=1,
        endpoint=endpoint,
        fingerprint=fingerprint,
    )
