"""Coordinate extraction from free-text model answers.

Three recognition tiers, highest wins:
  1. labeled pairs ("Latitude and Longitude: 51.5007, -0.1246", "latitude: x, longitude: y")
  2. bare decimal pairs ("48.8584, 2.2945", "48.8584° N, 2.2945° E")
  3. degree/minute/second pairs ("51°30'2.52\" N, 0°7'28.56\" W")
Inside a tier the last valid candidate wins: reasoning answers state their
final coordinates last.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional

from .metrics import GeoCoordinate

logger = logging.getLogger(__name__)

_NUM = r"[-+−]?[0-9]{1,3}(?:\.[0-9]+)?"
_DEC = r"[-+−]?[0-9]{1,3}\.[0-9]+"

_LABELED_PAIR_RE = re.compile(
    rf"\blat(?:itude)?\s*(?:and|&|/|,)\s*lon(?:gitude)?[^0-9+\-−]{{0,12}}?({_NUM})\s*[,;]\s*({_NUM})(?![0-9])",
    re.IGNORECASE,
)
_LABELED_SEPARATE_RE = re.compile(
    rf"\blat(?:itude)?\s*[:=]\s*({_NUM})\s*°?\s*[,;]?\s*\b(?:lng|lon(?:g(?:itude)?)?)\s*[:=]\s*({_NUM})(?![0-9])",
    re.IGNORECASE,
)
_BARE_PAIR_RE = re.compile(rf"(?<![0-9.])({_DEC})\s*,\s*({_DEC})(?![0-9])")
_HEMI_PAIR_RE = re.compile(
    r"(?<![0-9.])([0-9]{1,2}(?:\.[0-9]+)?)\s*°?\s*([NS])\b\s*,?\s*([0-9]{1,3}(?:\.[0-9]+)?)\s*°?\s*([EW])\b"
)
_DMS_PART = r"([0-9]{1,3})\s*(?:°|º|d|deg)\s*([0-9]{1,2})\s*(?:′|'|m)\s*([0-9]{1,2}(?:\.[0-9]+)?)\s*(?:″|\"|''|s)?\s*"
_DMS_PAIR_RE = re.compile(rf"{_DMS_PART}([NS])\b\s*,?\s*{_DMS_PART}([EW])\b")


class ParseFailure(str, Enum):
    NO_CANDIDATE = "no_candidate"
    OUT_OF_RANGE = "out_of_range"


class Tier(int, Enum):
    LABELED = 1
    DECIMAL = 2
    DMS = 3


@dataclass(frozen=True)
class Candidate:
    tier: Tier
    span: tuple[int, int]
    latitude: float
    longitude: float
    valid: bool


@dataclass(frozen=True)
class ParseResult:
    coordinate: Optional[GeoCoordinate]
    failure: Optional[ParseFailure]
    matched_span: Optional[tuple[int, int]]
    candidates_found: int
    tier: Optional[Tier] = None

    @property
    def ok(self) -> bool:
        return self.coordinate is not None

    @property
    def ambiguous(self) -> bool:
        """A coordinate was chosen among several candidates."""
        return self.ok and self.candidates_found > 1

    def to_dict(self) -> dict:
        return {
            "failure": self.failure.value if self.failure else None,
            "span": list(self.matched_span) if self.matched_span else None,
            "candidates_found": self.candidates_found,
            "tier": int(self.tier) if self.tier else None,
        }


def dms_to_decimal(deg: int, minutes: int, sec: float, hemisphere: str) -> float:
    hemi = hemisphere.upper()
    if hemi not in ("N", "S", "E", "W"):
        raise ValueError(f"hemisphere must be one of N, S, E, W, got {hemisphere!r}")
    if deg < 0:
        raise ValueError("degrees must be non-negative")
    if not 0 <= minutes < 60:
        raise ValueError(f"minutes out of range: {minutes}")
    if not 0 <= sec < 60:
        raise ValueError(f"seconds out of range: {sec}")
    value = deg + minutes / 60.0 + sec / 3600.0
    return -value if hemi in ("S", "W") else value


def _num(text: str) -> float:
    return float(text.replace("−", "-"))


def _in_range(lat: float, lon: float) -> bool:
    return -90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0


def _candidate(tier: Tier, match: re.Match[str], lat: float, lon: float) -> Candidate:
    return Candidate(tier, match.span(), lat, lon, _in_range(lat, lon))


def _iter_candidates(text: str) -> Iterator[Candidate]:
    for rx in (_LABELED_PAIR_RE, _LABELED_SEPARATE_RE):
        for m in rx.finditer(text):
            yield _candidate(Tier.LABELED, m, _num(m.group(1)), _num(m.group(2)))

    for m in _BARE_PAIR_RE.finditer(text):
        yield _candidate(Tier.DECIMAL, m, _num(m.group(1)), _num(m.group(2)))
    for m in _HEMI_PAIR_RE.finditer(text):
        lat, lon = float(m.group(1)), float(m.group(3))
        if m.group(2) == "S":
            lat = -lat
        if m.group(4) == "W":
            lon = -lon
        yield _candidate(Tier.DECIMAL, m, lat, lon)

    for m in _DMS_PAIR_RE.finditer(text):
        try:
            lat = dms_to_decimal(int(m.group(1)), int(m.group(2)), float(m.group(3)), m.group(4))
            lon = dms_to_decimal(int(m.group(5)), int(m.group(6)), float(m.group(7)), m.group(8))
        except ValueError:
            yield Candidate(Tier.DMS, m.span(), float("nan"), float("nan"), False)
            continue
        yield _candidate(Tier.DMS, m, lat, lon)


def parse_coordinates(text: str | bytes) -> ParseResult:
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")

    candidates = list(_iter_candidates(text))
    if not candidates:
        return ParseResult(None, ParseFailure.NO_CANDIDATE, None, 0)

    for tier in Tier:
        valid = [c for c in candidates if c.tier is tier and c.valid]
        if not valid:
            continue
        chosen = max(valid, key=lambda c: c.span[0])
        return ParseResult(
            GeoCoordinate(chosen.latitude, chosen.longitude),
            None,
            chosen.span,
            len(valid),
            tier,
        )

    last = max(candidates, key=lambda c: c.span[0])
    return ParseResult(None, ParseFailure.OUT_OF_RANGE, last.span, len(candidates), last.tier)
