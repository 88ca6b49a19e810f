from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from geobench.dataset.records import Localizability
from geobench.metrics import SCORED_LEVELS, BoundaryLevel, boundary_accuracies

from .outcomes import PredictionOutcome, canonical_order, strategy_rank

logger = logging.getLogger(__name__)

DEFAULT_PENALTY_KM = 2500.0


class FailurePolicy(str, Enum):
    SCORE_ZERO = "score-zero"
    EXCLUDE_AND_REPORT = "exclude-and-report"


@dataclass(frozen=True)
class ReportRow:
    endpoint: str
    strategy: Optional[str]
    accuracies: dict[BoundaryLevel, float]
    avg_distance_km: Optional[float]
    avg_geoscore: Optional[float]
    n: int
    n_failed: int = 0
    # denominator of the means and accuracies
    n_scored: int = 0
    group: Optional[str] = None

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise ValueError("a report row needs at least one outcome")
        values = [self.accuracies[level] for level in SCORED_LEVELS]
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError(f"boundary accuracies must not decrease across levels: {values}")

    @property
    def failure_rate(self) -> float:
        """Failed share of the row, in percent."""
        return 100.0 * self.n_failed / self.n

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"endpoint": self.endpoint, "strategy": self.strategy}
        if self.group is not None:
            data["group"] = self.group
        data.update({level.key: self.accuracies[level] for level in SCORED_LEVELS})
        data.update(
            avg_km=self.avg_distance_km,
            avg_geoscore=self.avg_geoscore,
            fail_rate=self.failure_rate,
            n=self.n,
            n_failed=self.n_failed,
            n_scored=self.n_scored,
        )
        return data


@dataclass(frozen=True)
class EvaluationReport:
    rows: list[ReportRow]
    policy: FailurePolicy = FailurePolicy.SCORE_ZERO
    penalty_km: float = DEFAULT_PENALTY_KM
    group_label: Optional[str] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def has_strategies(self) -> bool:
        return any(r.strategy is not None for r in self.rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "failure_policy": self.policy.value,
            "penalty_km": self.penalty_km,
            "metadata": dict(self.metadata),
            "rows": [r.to_dict() for r in self.rows],
        }


def _row(
    endpoint: str,
    strategy: Optional[str],
    outcomes: Sequence[PredictionOutcome],
    policy: FailurePolicy,
    penalty_km: float,
    group: Optional[str] = None,
) -> ReportRow:
    failed = [o for o in outcomes if not o.ok]
    if policy is FailurePolicy.SCORE_ZERO:
        # inf keeps failures outside every boundary while the mean uses the penalty
        boundary_input = [o.distance_km if o.ok else np.inf for o in outcomes]
        distances = np.array([o.distance_km if o.ok else penalty_km for o in outcomes], dtype=float)
        scores = np.array([o.geoscore if o.ok else 0.0 for o in outcomes], dtype=float)
    else:
        kept = [o for o in outcomes if o.ok]
        boundary_input = [o.distance_km for o in kept]
        distances = np.array([o.distance_km for o in kept], dtype=float)
        scores = np.array([o.geoscore for o in kept], dtype=float)

    if distances.size:
        accuracies = boundary_accuracies(boundary_input)
        avg_km: Optional[float] = float(np.mean(distances))
        avg_score: Optional[float] = float(np.mean(scores))
    else:
        accuracies = {level: 0.0 for level in SCORED_LEVELS}
        avg_km = avg_score = None

    return ReportRow(
        endpoint=endpoint,
        strategy=strategy,
        accuracies=accuracies,
        avg_distance_km=avg_km,
        avg_geoscore=avg_score,
        n=len(outcomes),
        n_failed=len(failed),
        n_scored=int(distances.size),
        group=group,
    )


def aggregate(
    outcomes: Iterable[PredictionOutcome],
    policy: FailurePolicy | str = FailurePolicy.SCORE_ZERO,
    penalty_km: float = DEFAULT_PENALTY_KM,
) -> EvaluationReport:
    """One row per (endpoint, strategy), in canonical order."""
    policy = FailurePolicy(policy)
    ordered = canonical_order(outcomes)
    if not ordered:
        raise ValueError("cannot aggregate an empty outcome list")
    if penalty_km < 0:
        raise ValueError("penalty distance must be non-negative")

    groups: dict[tuple[str, str], list[PredictionOutcome]] = defaultdict(list)
    for o in ordered:
        groups[(o.endpoint, o.strategy)].append(o)

    rows = [_row(endpoint, strategy, items, policy, penalty_km) for (endpoint, strategy), items in groups.items()]
    failed = sum(r.n_failed for r in rows)
    if failed:
        logger.info("%d of %d outcomes failed (%s)", failed, len(ordered), policy.value)
    return EvaluationReport(rows=rows, policy=policy, penalty_km=penalty_km)


def merge_rows(
    rows: Sequence[ReportRow],
    *,
    endpoint: Optional[str] = None,
    strategy: Optional[str] = None,
    group: Optional[str] = None,
) -> ReportRow:
    """Weighted combination of rows over disjoint outcome sets."""
    if not rows:
        raise ValueError("nothing to merge")
    weights = np.array([r.n_scored for r in rows], dtype=float)
    total = float(weights.sum())
    scored = [r for r in rows if r.n_scored]

    if total > 0:
        w = np.array([r.n_scored for r in scored], dtype=float)
        accuracies = {
            level: float(np.dot(w, [r.accuracies[level] for r in scored]) / total) for level in SCORED_LEVELS
        }
        avg_km: Optional[float] = float(np.dot(w, [r.avg_distance_km for r in scored]) / total)
        avg_score: Optional[float] = float(np.dot(w, [r.avg_geoscore for r in scored]) / total)
    else:
        accuracies = {level: 0.0 for level in SCORED_LEVELS}
        avg_km = avg_score = None

    return ReportRow(
        endpoint=endpoint if endpoint is not None else rows[0].endpoint,
        strategy=strategy,
        accuracies=accuracies,
        avg_distance_km=avg_km,
        avg_geoscore=avg_score,
        n=sum(r.n for r in rows),
        n_failed=sum(r.n_failed for r in rows),
        n_scored=int(total),
        group=group,
    )


def collapse_strategies(report: EvaluationReport) -> EvaluationReport:
    """One row per endpoint, pooling every strategy."""
    by_endpoint: dict[str, list[ReportRow]] = defaultdict(list)
    for row in report.rows:
        by_endpoint[row.endpoint].append(row)
    rows = [merge_rows(items, endpoint=name) for name, items in by_endpoint.items()]
    return replace(report, rows=rows)


def aggregate_by_localizability(
    outcomes: Iterable[PredictionOutcome],
    policy: FailurePolicy | str = FailurePolicy.SCORE_ZERO,
    penalty_km: float = DEFAULT_PENALTY_KM,
) -> EvaluationReport:
    """Rows per (endpoint, strategy, localizability tag) for failure analysis."""
    policy = FailurePolicy(policy)
    ordered = canonical_order(outcomes)
    if not ordered:
        raise ValueError("cannot aggregate an empty outcome list")

    tag_order = {tag: i for i, tag in enumerate(Localizability)}
    groups: dict[tuple[str, str, Localizability], list[PredictionOutcome]] = defaultdict(list)
    for o in ordered:
        groups[(o.endpoint, o.strategy, o.localizability)].append(o)

    keys = sorted(groups, key=lambda k: (k[0], strategy_rank(k[1]), k[1], tag_order[k[2]]))
    rows = [_row(e, s, groups[(e, s, tag)], policy, penalty_km, group=tag.value) for e, s, tag in keys]
    return EvaluationReport(rows=rows, policy=policy, penalty_km=penalty_km, group_label="Localizability")


def worst_predictions(outcomes: Iterable[PredictionOutcome], k: int = 10) -> list[PredictionOutcome]:
    """The k parsed predictions with the largest error, largest first."""
    if k < 0:
        raise ValueError("k must be non-negative")
    parsed = [o for o in outcomes if o.ok]
    parsed.sort(key=lambda o: (-o.distance_km, o.sort_key))
    return parsed[:k]
