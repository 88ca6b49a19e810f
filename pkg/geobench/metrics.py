"""Great-circle distance, GeoScore and administrative-boundary accuracy.

All functions are pure; distances are kilometers carried as floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

GEOSCORE_MAX = 5000.0
GEOSCORE_SCALE_KM = 1492.7


@dataclass(frozen=True)
class GeoCoordinate:
    latitude: float
    longitude: float

    def __post_init__(self) -> None:
        lat = float(self.latitude)
        lon = float(self.longitude)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError("coordinate components must be finite")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude out of range: {lat}")
        # only touch longitudes that need it so in-range values stay bit-exact
        if not -180.0 <= lon < 180.0:
            lon = (lon + 180.0) % 360.0 - 180.0
            # the modulo can round up to exactly 180
            if lon >= 180.0:
                lon -= 360.0
        object.__setattr__(self, "latitude", lat)
        object.__setattr__(self, "longitude", lon)

    def __str__(self) -> str:
        return format_coordinate(self)


def format_degrees(value: float) -> str:
    return np.format_float_positional(value, trim="-")


def format_coordinate(coord: GeoCoordinate) -> str:
    """Canonical "lat, lon" text at the shortest exact precision."""
    return f"{format_degrees(coord.latitude)}, {format_degrees(coord.longitude)}"


@dataclass(frozen=True)
class EarthModel:
    radius_km: float = 6371.0

    def __post_init__(self) -> None:
        if not self.radius_km > 0:
            raise ValueError("earth radius must be positive")


EARTH = EarthModel()


class BoundaryLevel(Enum):
    STREET = 1.0
    CITY = 25.0
    REGION = 200.0
    COUNTRY = 750.0
    CONTINENT = 2500.0
    BEYOND = math.inf

    @property
    def threshold_km(self) -> float:
        return self.value

    @property
    def key(self) -> str:
        return self.name.lower()

    @property
    def label(self) -> str:
        if self is BoundaryLevel.BEYOND:
            return "Beyond"
        return f"{self.name.capitalize()} ({self.value:,.0f} km)"


SCORED_LEVELS: tuple[BoundaryLevel, ...] = tuple(lvl for lvl in BoundaryLevel if lvl is not BoundaryLevel.BEYOND)


def haversine_distance(a: GeoCoordinate, b: GeoCoordinate, earth: EarthModel = EARTH) -> float:
    phi1 = math.radians(a.latitude)
    phi2 = math.radians(b.latitude)
    dphi = phi2 - phi1
    dlam = math.radians(b.longitude - a.longitude)
    v = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    v = min(1.0, max(0.0, v))
    return 2.0 * earth.radius_km * math.asin(math.sqrt(v))


def destination_point(
    origin: GeoCoordinate,
    distance_km: float,
    bearing_deg: float,
    earth: EarthModel = EARTH,
) -> GeoCoordinate:
    """Point reached by travelling `distance_km` from `origin` along an initial bearing."""
    if distance_km < 0:
        raise ValueError("distance must be non-negative")
    if distance_km == 0:
        return origin
    delta = distance_km / earth.radius_km
    theta = math.radians(bearing_deg)
    phi1 = math.radians(origin.latitude)
    lam1 = math.radians(origin.longitude)

    sin_phi2 = math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta)
    phi2 = math.asin(min(1.0, max(-1.0, sin_phi2)))
    lam2 = lam1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * math.sin(phi2),
    )
    return GeoCoordinate(math.degrees(phi2), math.degrees(lam2))


def geoscore(distance_km: float) -> float:
    if distance_km < 0:
        raise ValueError(f"distance must be non-negative, got {distance_km}")
    return GEOSCORE_MAX * math.exp(-distance_km / GEOSCORE_SCALE_KM)


def classify_boundary(distance_km: float) -> BoundaryLevel:
    if distance_km < 0:
        raise ValueError(f"distance must be non-negative, got {distance_km}")
    for level in SCORED_LEVELS:
        if distance_km <= level.threshold_km:
            return level
    return BoundaryLevel.BEYOND


def boundary_accuracies(distances: Sequence[float] | Iterable[float]) -> dict[BoundaryLevel, float]:
    """Percentage of distances within each level's threshold (inclusive)."""
    values = np.asarray(list(distances), dtype=float)
    if values.size == 0:
        raise ValueError("boundary accuracies need at least one distance")
    if np.any(values < 0):
        raise ValueError("distances must be non-negative")
    return {
        level: 100.0 * float(np.count_nonzero(values <= level.threshold_km)) / values.size
        for level in SCORED_LEVELS
    }
