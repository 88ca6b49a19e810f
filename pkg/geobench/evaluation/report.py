"""Table renderers for evaluation reports.

Markdown and LaTeX follow the published table layout: five boundary columns,
then average distance and average GeoScore, one decimal everywhere.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from typing import Literal, Mapping, Optional, Sequence

from geobench.metrics import SCORED_LEVELS

from .aggregate import EvaluationReport, FailurePolicy, ReportRow, merge_rows
from .outcomes import PredictionOutcome, strategy_rank

logger = logging.getLogger(__name__)

ReportFormat = Literal["md", "csv", "json", "latex"]
REPORT_FORMATS: tuple[str, ...] = ("md", "csv", "json", "latex")

CSV_COLUMNS = (
    "endpoint",
    "strategy",
    "street",
    "city",
    "region",
    "country",
    "continent",
    "avg_km",
    "avg_geoscore",
    "fail_rate",
    "n",
)
PLOT_HEADER = ("endpoint", "strategy", "metric", "value")
PLOT_METRICS = tuple(level.key for level in SCORED_LEVELS) + ("avg_km", "avg_geoscore", "fail_rate")

_MISSING = "n/a"


def fmt1(value: Optional[float]) -> str:
    return _MISSING if value is None else f"{value:.1f}"


def _metric_cells(row: ReportRow) -> list[str]:
    cells = [fmt1(row.accuracies[level]) for level in SCORED_LEVELS]
    cells += [fmt1(row.avg_distance_km), fmt1(row.avg_geoscore)]
    return cells


def _label_cells(report: EvaluationReport, row: ReportRow) -> list[str]:
    cells = [row.endpoint]
    if report.has_strategies:
        cells.append(row.strategy or "")
    if report.group_label:
        cells.append(row.group or "")
    return cells


def policy_footnote(report: EvaluationReport) -> str:
    if report.policy is FailurePolicy.SCORE_ZERO:
        return (
            f"Failure policy: {report.policy.value}. Failed predictions score 0, count as outside "
            f"every boundary and enter the mean distance as {report.penalty_km:,.1f} km."
        )
    return (
        f"Failure policy: {report.policy.value}. Failed predictions are left out of the means "
        "and accuracies and reported in the failure rate column."
    )


def _markdown(report: EvaluationReport) -> str:
    header = ["Endpoint"]
    if report.has_strategies:
        header.append("Strategy")
    if report.group_label:
        header.append(report.group_label)
    header += [level.label for level in SCORED_LEVELS]
    header += ["Avg Distance (km)", "Avg GeoScore (0-5000)", "Fail Rate (%)", "N"]

    n_labels = len(header) - len(SCORED_LEVELS) - 4
    align = [":---"] * n_labels + ["---:"] * (len(header) - n_labels)

    lines = ["| " + " | ".join(header) + " |", "| " + " | ".join(align) + " |"]
    for row in report.rows:
        cells = _label_cells(report, row) + _metric_cells(row) + [fmt1(row.failure_rate), str(row.n)]
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    lines.append(f"_{policy_footnote(report)}_")
    return "\n".join(lines) + "\n"


def _latex(report: EvaluationReport) -> str:
    lines = []
    for row in report.rows:
        label = row.endpoint
        if report.has_strategies and row.strategy:
            label = f"{label} ({row.strategy})"
        if report.group_label and row.group:
            label = f"{label} [{row.group}]"
        lines.append(" & ".join([label] + _metric_cells(row)) + " \\\\")
    return "\n".join(lines) + "\n"


def _csv(report: EvaluationReport) -> str:
    columns = list(CSV_COLUMNS)
    if report.group_label:
        columns.insert(2, "group")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in report.rows:
        record = [row.endpoint, row.strategy or ""]
        if report.group_label:
            record.append(row.group or "")
        record += _metric_cells(row) + [fmt1(row.failure_rate), str(row.n)]
        writer.writerow(record)
    return buf.getvalue()


def render_report(report: EvaluationReport, fmt: ReportFormat | str = "md") -> str:
    fmt = "md" if fmt == "markdown" else fmt
    if fmt == "md":
        return _markdown(report)
    if fmt == "csv":
        return _csv(report)
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    if fmt == "latex":
        return _latex(report)
    raise ValueError(f"unknown report format {fmt!r}; expected one of {', '.join(REPORT_FORMATS)}")


def emit_plot_data(report: EvaluationReport) -> str:
    """Long-format series: one line per (row, metric), full precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PLOT_HEADER)
    for row in report.rows:
        values = row.to_dict()
        for metric in PLOT_METRICS:
            value = values[metric]
            writer.writerow([row.endpoint, row.strategy or "", metric, "" if value is None else repr(float(value))])
    return buf.getvalue()


def render_dataset_matrix(reports: Mapping[str, EvaluationReport], fmt: Literal["md", "csv"] = "md") -> str:
    """GeoScore per dataset side by side, boundary accuracies pooled over all datasets."""
    if not reports:
        raise ValueError("no datasets to render")
    datasets = list(reports)
    keyed: dict[tuple[str, Optional[str]], dict[str, ReportRow]] = {}
    for name in datasets:
        for row in reports[name].rows:
            keyed.setdefault((row.endpoint, row.strategy), {})[name] = row
    keys = sorted(keyed, key=lambda k: (k[0], strategy_rank(k[1] or ""), k[1] or ""))
    with_strategy = any(k[1] is not None for k in keys)

    table: list[list[str]] = []
    for endpoint, strategy in keys:
        per_ds = keyed[(endpoint, strategy)]
        pooled = merge_rows(list(per_ds.values()), endpoint=endpoint, strategy=strategy)
        cells = [endpoint] + ([strategy or ""] if with_strategy else [])
        cells += [fmt1(per_ds[d].avg_geoscore) if d in per_ds else _MISSING for d in datasets]
        cells += [fmt1(pooled.accuracies[level]) for level in SCORED_LEVELS]
        table.append(cells)

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        head = ["endpoint"] + (["strategy"] if with_strategy else [])
        head += [f"geoscore_{d}" for d in datasets] + [level.key for level in SCORED_LEVELS]
        writer.writerow(head)
        writer.writerows(table)
        return buf.getvalue()

    header = ["Endpoint"] + (["Strategy"] if with_strategy else [])
    header += [f"GeoScore {d}" for d in datasets] + [level.label for level in SCORED_LEVELS]
    n_labels = 2 if with_strategy else 1
    align = [":---"] * n_labels + ["---:"] * (len(header) - n_labels)
    lines = ["| " + " | ".join(header) + " |", "| " + " | ".join(align) + " |"]
    lines += ["| " + " | ".join(cells) + " |" for cells in table]
    return "\n".join(lines) + "\n"


def render_worst(outcomes: Sequence[PredictionOutcome]) -> str:
    """JSONL listing of the largest errors, truncated reply text included."""
    out = io.StringIO()
    for o in outcomes:
        out.write(
            json.dumps(
                {
                    "endpoint": o.endpoint,
                    "strategy": o.strategy,
                    "record_id": o.record_id,
                    "localizability": o.localizability.value,
                    "distance_km": o.distance_km,
                    "truth": [o.truth.latitude, o.truth.longitude],
                    "predicted": [o.predicted.latitude, o.predicted.longitude] if o.predicted else None,
                    "raw_text": (o.raw_text or "")[:500],
                },
                ensure_ascii=False,
            )
            + "\n"
        )
    return out.getvalue()
