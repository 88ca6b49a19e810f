from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from geobench.errors import ManifestError
from geobench.metrics import GeoCoordinate

logger = logging.getLogger(__name__)

_COUNTRY_CODE_RE = re.compile(r"^[A-Z]{2}$")
VIEW_COUNT = 4


class Localizability(str, Enum):
    MINIMAL_CONTEXT = "minimal_context"
    CONTEXTUALLY_AMBIGUOUS = "contextually_ambiguous"
    HIGHLY_MISLEADING = "highly_misleading"
    LOCALIZABLE = "localizable"
    UNTAGGED = "untagged"


@dataclass(frozen=True)
class ImageRecord:
    id: str
    image_uri: str
    truth: GeoCoordinate
    country_code: str
    localizability: Localizability = Localizability.UNTAGGED
    # front, back, left, right
    views: Optional[tuple[str, str, str, str]] = None
    address: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        if not _COUNTRY_CODE_RE.match(self.country_code):
            raise ValueError(f"country code must be ISO-3166 alpha-2, got {self.country_code!r}")
        if self.views is not None and len(self.views) != VIEW_COUNT:
            raise ValueError(f"views must have exactly {VIEW_COUNT} entries, got {len(self.views)}")


@dataclass(frozen=True)
class CountryArea:
    country_code: str
    area_km2: float

    def __post_init__(self) -> None:
        if not _COUNTRY_CODE_RE.match(self.country_code):
            raise ValueError(f"country code must be ISO-3166 alpha-2, got {self.country_code!r}")
        if not self.area_km2 > 0:
            raise ValueError(f"area for {self.country_code} must be positive")


class ManifestRow(BaseModel):
    """One JSONL line of an image manifest."""

    model_config = ConfigDict(extra="ignore")

    id: str
    image_uri: str
    lat: float
    lon: float
    country: str
    views: Optional[list[str]] = None
    localizability: Localizability = Localizability.UNTAGGED
    address: Optional[str] = None

    @field_validator("id", "image_uri")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("must be non-empty")
        return value

    @field_validator("lat")
    @classmethod
    def _lat_range(cls, value: float) -> float:
        if not -90.0 <= value <= 90.0:
            raise ValueError("latitude out of range")
        return value

    @field_validator("country")
    @classmethod
    def _country(cls, value: str) -> str:
        code = value.strip().upper()
        if not _COUNTRY_CODE_RE.match(code):
            raise ValueError("country must be an ISO-3166 alpha-2 code")
        return code

    @field_validator("views")
    @classmethod
    def _four_views(cls, value: Optional[list[str]]) -> Optional[list[str]]:
        if value is not None and len(value) != VIEW_COUNT:
            raise ValueError(f"views must have exactly {VIEW_COUNT} entries")
        return value

    def to_record(self) -> ImageRecord:
        return ImageRecord(
            id=self.id,
            image_uri=self.image_uri,
            truth=GeoCoordinate(self.lat, self.lon),
            country_code=self.country,
            localizability=self.localizability,
            views=tuple(self.views) if self.views is not None else None,
            address=self.address,
        )


def _first_error(exc: ValidationError) -> tuple[str, str]:
    err = exc.errors()[0]
    field = ".".join(str(part) for part in err.get("loc", ())) or "?"
    msg = err.get("msg", "invalid value")
    # pydantic prefixes custom messages with "Value error, "
    return field, msg.removeprefix("Value error, ")


def parse_manifest_lines(lines: Iterable[str]) -> list[ImageRecord]:
    records: list[ImageRecord] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"invalid JSON ({exc.msg})", line=lineno) from exc
        if not isinstance(payload, dict):
            raise ManifestError("expected a JSON object", line=lineno)
        try:
            row = ManifestRow.model_validate(payload)
            record = row.to_record()
        except ValidationError as exc:
            field, msg = _first_error(exc)
            raise ManifestError(msg, line=lineno, field=field) from exc
        except ValueError as exc:
            raise ManifestError(str(exc), line=lineno) from exc
        if record.id in seen:
            raise ManifestError(
                f"duplicate id {record.id!r} (first seen on line {seen[record.id]})",
                line=lineno,
                field="id",
            )
        seen[record.id] = lineno
        records.append(record)
    return records


def ingest_manifest(source: str | Path) -> list[ImageRecord]:
    path = Path(source)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    with path.open("r", encoding="utf-8") as handle:
        records = parse_manifest_lines(handle)
    logger.info("Ingested %d records from %s", len(records), path)
    return records


def record_to_row(record: ImageRecord, **extra: Any) -> dict[str, Any]:
    row: dict[str, Any] = {
        "id": record.id,
        "image_uri": record.image_uri,
        "lat": record.truth.latitude,
        "lon": record.truth.longitude,
        "country": record.country_code,
    }
    if record.views is not None:
        row["views"] = list(record.views)
    if record.localizability is not Localizability.UNTAGGED:
        row["localizability"] = record.localizability.value
    if record.address is not None:
        row["address"] = record.address
    row.update(extra)
    return row


def write_manifest(
    path: str | Path,
    records: Iterable[ImageRecord],
    extras: Optional[Mapping[str, Mapping[str, Any]]] = None,
) -> int:
    """Write records as JSONL; `extras` adds per-record fields keyed by record id."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with out.open("w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            row = record_to_row(record, **dict((extras or {}).get(record.id, {})))
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
            count += 1
    return count


def load_country_areas(source: str | Path) -> list[CountryArea]:
    path = Path(source)
    if not path.is_file():
        raise ManifestError(f"country area table not found: {path}")
    areas: list[CountryArea] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or {"country_code", "area_km2"} - set(reader.fieldnames):
            raise ManifestError("area table header must be country_code,area_km2", line=1)
        for lineno, row in enumerate(reader, start=2):
            code = (row.get("country_code") or "").strip().upper()
            try:
                area = CountryArea(code, float(row.get("area_km2") or "nan"))
            except ValueError as exc:
                raise ManifestError(str(exc), line=lineno) from exc
            if code in seen:
                raise ManifestError(f"duplicate country code {code}", line=lineno, field="country_code")
            seen.add(code)
            areas.append(area)
    return areas
