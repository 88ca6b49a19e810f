from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from geobench.errors import ManifestError

from .records import CountryArea, ImageRecord

logger = logging.getLogger(__name__)


def apportion(total: int, weights: Mapping[str, float]) -> dict[str, int]:
    """Largest-remainder apportionment; ties go to the smaller key."""
    if total < 0:
        raise ValueError("total must be non-negative")
    if not weights:
        return {}
    weight_sum = math.fsum(weights.values())
    if weight_sum <= 0:
        raise ValueError("weights must sum to a positive value")
    exact = {key: total * w / weight_sum for key, w in weights.items()}
    quotas = {key: int(math.floor(value)) for key, value in exact.items()}
    leftover = total - sum(quotas.values())
    order = sorted(exact, key=lambda k: (-(exact[k] - quotas[k]), k))
    for key in order[:leftover]:
        quotas[key] += 1
    return quotas


@dataclass(frozen=True)
class Allocation:
    quotas: dict[str, int]
    shortfall: int
    capped: tuple[str, ...]


def allocate_quotas(total: int, areas: Mapping[str, float], available: Mapping[str, int]) -> Allocation:
    """Apportion `total` by area, capping countries at their available records.

    A capped country's unmet share is re-apportioned over the remaining countries.
    """
    fixed: dict[str, int] = {}
    active = {code: areas[code] for code in available}
    remaining = total
    while True:
        quotas = apportion(remaining, active) if active else {}
        over = [code for code, q in quotas.items() if q > available[code]]
        if not over:
            break
        for code in over:
            fixed[code] = available[code]
            remaining -= available[code]
            del active[code]
    quotas.update(fixed)
    assigned = sum(quotas.values())
    return Allocation(quotas=quotas, shortfall=total - assigned, capped=tuple(sorted(fixed)))


def sample_by_area(
    records: Sequence[ImageRecord],
    areas: Sequence[CountryArea],
    total: int,
    seed: int,
) -> list[ImageRecord]:
    if total <= 0:
        raise ValueError("sample total must be positive")
    area_by_code = {a.country_code: a.area_km2 for a in areas}
    by_country: dict[str, list[ImageRecord]] = defaultdict(list)
    for record in records:
        if record.country_code not in area_by_code:
            raise ManifestError(f"unknown country code {record.country_code!r} for record {record.id!r}")
        by_country[record.country_code].append(record)

    available = {code: len(items) for code, items in by_country.items()}
    empty = sorted(set(area_by_code) - set(available))
    if empty:
        logger.warning(
            "Area sampling: no records for %d listed countries (%s); they get no quota",
            len(empty),
            ", ".join(empty),
        )
    allocation = allocate_quotas(total, area_by_code, available)
    if allocation.capped:
        logger.warning(
            "Area sampling shortfall: %s had fewer records than their quota; redistributed",
            ", ".join(allocation.capped),
        )
    if allocation.shortfall:
        logger.warning("Area sampling could only select %d of %d records", total - allocation.shortfall, total)

    rng = np.random.default_rng(seed)
    chosen: set[str] = set()
    for code in sorted(by_country):
        pool = by_country[code]
        k = allocation.quotas.get(code, 0)
        if k == 0:
            continue
        picks = rng.choice(len(pool), size=k, replace=False)
        chosen.update(pool[int(i)].id for i in picks)
    # keep manifest order in the output
    return [r for r in records if r.id in chosen]


@dataclass(frozen=True)
class SplitManifest:
    train_ids: frozenset[str]
    test_ids: frozenset[str]
    seed: int

    def __post_init__(self) -> None:
        if self.train_ids & self.test_ids:
            raise ValueError("train and test ids overlap")

    def to_json(self) -> str:
        return json.dumps(
            {"seed": self.seed, "train_ids": sorted(self.train_ids), "test_ids": sorted(self.test_ids)},
            indent=2,
        ) + "\n"

    @classmethod
    def load(cls, path: str | Path) -> "SplitManifest":
        with Path(path).open("r", encoding="utf-8") as handle:
            data = json.load(handle)
        return cls(frozenset(data["train_ids"]), frozenset(data["test_ids"]), int(data["seed"]))


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def split(records: Sequence[ImageRecord], train_fraction: float, seed: int) -> SplitManifest:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    ids = [r.id for r in records]
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[int(i)] for i in order]
    n_train = round_half_up(train_fraction * len(ids))
    manifest = SplitManifest(frozenset(shuffled[:n_train]), frozenset(shuffled[n_train:]), seed)
    logger.info("Split %d records: %d train / %d test (seed=%d)", len(ids), n_train, len(ids) - n_train, seed)
    return manifest
