import csv
import io
import json
from pathlib import Path

import pytest

from geobench.dataset import Localizability
from geobench.evaluation import (
    EvaluationReport,
    FailurePolicy,
    ReportRow,
    aggregate_by_localizability,
    emit_plot_data,
    render_dataset_matrix,
    render_report,
    render_worst,
)
from geobench.evaluation.outcomes import PredictionOutcome
from geobench.metrics import SCORED_LEVELS, BoundaryLevel, GeoCoordinate

GOLDEN = Path(__file__).parent / "golden"
ETHAN = (27.0, 55.0, 75.5, 91.2, 99.0)


def _row(endpoint="ETHAN", strategy=None, accuracies=ETHAN, km=105.0, score=4600.0, n=20000, **kw):
    kw.setdefault("n_scored", n)
    return ReportRow(
        endpoint=endpoint,
        strategy=strategy,
        accuracies=dict(zip(SCORED_LEVELS, accuracies)),
        avg_distance_km=km,
        avg_geoscore=score,
        n=n,
        **kw,
    )


def test_markdown_matches_golden():
    report = EvaluationReport([_row()])
    assert render_report(report, "md") == (GOLDEN / "report_single.md").read_text(encoding="utf-8")
    assert render_report(report, "markdown") == render_report(report, "md")


def test_csv_matches_golden():
    report = EvaluationReport([_row()])
    assert render_report(report, "csv") == (GOLDEN / "report_single.csv").read_text(encoding="utf-8")


def test_latex_rows():
    report = EvaluationReport([_row(), _row("GPT-4o", "cot", (20.1, 50.2, 70.3, 85.4, 95.5), 180.25, 4400.05)])
    lines = render_report(report, "latex").splitlines()
    assert lines[0] == "ETHAN & 27.0 & 55.0 & 75.5 & 91.2 & 99.0 & 105.0 & 4600.0 \\\\"
    assert lines[1].startswith("GPT-4o (cot) & 20.1 & 50.2 & 70.3 & 85.4 & 95.5 & ")


def test_markdown_strategy_column_and_exclude_footnote():
    rows = [
        _row("m", "zero-shot", n=4, n_failed=1, n_scored=3),
        _row("m", "cot", (0.0,) * 5, None, None, n=2, n_failed=2, n_scored=0),
    ]
    text = render_report(EvaluationReport(rows, policy=FailurePolicy.EXCLUDE_AND_REPORT), "md")
    lines = text.splitlines()
    assert lines[0].startswith("| Endpoint | Strategy | Street (1 km) |")
    assert lines[1].startswith("| :--- | :--- | ---: |")
    assert lines[2].endswith("| 25.0 | 4 |")
    assert "| n/a | n/a | 100.0 | 2 |" in lines[3]
    assert lines[-1] == (
        "_Failure policy: exclude-and-report. Failed predictions are left out of the means and accuracies "
        "and reported in the failure rate column._"
    )


def test_json_report():
    data = json.loads(render_report(EvaluationReport([_row()], metadata={"seed": 1337}), "json"))
    assert data["failure_policy"] == "score-zero"
    assert data["metadata"] == {"seed": 1337}
    assert data["rows"][0]["street"] == 27.0
    assert data["rows"][0]["continent"] == 99.0


def test_unknown_format():
    with pytest.raises(ValueError, match="unknown report format"):
        render_report(EvaluationReport([_row()]), "html")


def test_report_row_rejects_decreasing_accuracies():
    with pytest.raises(ValueError, match="must not decrease"):
        _row(accuracies=(30.0, 20.0, 40.0, 50.0, 60.0))


def test_plot_data():
    rows = list(csv.reader(io.StringIO(emit_plot_data(EvaluationReport([_row()])))))
    assert rows[0] == ["endpoint", "strategy", "metric", "value"]
    assert len(rows) == 1 + 8
    values = {metric: value for _, _, metric, value in rows[1:]}
    assert values["street"] == "27.0"
    assert values["avg_km"] == "105.0"
    assert values["avg_geoscore"] == "4600.0"
    assert values["fail_rate"] == "0.0"


def test_dataset_matrix():
    reports = {
        name: EvaluationReport([_row("GeoSpy", None, (24.5, 52.7, 73.1, 88.4, 97.3), 300.0, score, n=n)])
        for name, score, n in (("im2gps3k", 4570.8, 2997), ("yfcc4k", 4620.5, 4536), ("gws15k", 4451.6, 14000))
    }
    md = render_dataset_matrix(reports, "md").splitlines()
    assert md[0] == (
        "| Endpoint | GeoScore im2gps3k | GeoScore yfcc4k | GeoScore gws15k | Street (1 km) | City (25 km) "
        "| Region (200 km) | Country (750 km) | Continent (2,500 km) |"
    )
    assert md[2] == "| GeoSpy | 4570.8 | 4620.5 | 4451.6 | 24.5 | 52.7 | 73.1 | 88.4 | 97.3 |"

    rows = list(csv.reader(io.StringIO(render_dataset_matrix(reports, "csv"))))
    assert rows[0][:4] == ["endpoint", "geoscore_im2gps3k", "geoscore_yfcc4k", "geoscore_gws15k"]
    assert rows[1] == ["GeoSpy", "4570.8", "4620.5", "4451.6", "24.5", "52.7", "73.1", "88.4", "97.3"]


def test_dataset_matrix_marks_missing_endpoints():
    reports = {
        "a": EvaluationReport([_row("x", n=10), _row("y", n=10)]),
        "b": EvaluationReport([_row("x", n=10)]),
    }
    lines = render_dataset_matrix(reports, "md").splitlines()
    assert lines[3].startswith("| y | 4600.0 | n/a |")


def test_localizability_report_columns():
    outcomes = [
        PredictionOutcome(
            record_id=f"r{i}",
            endpoint="m",
            strategy="cot",
            truth=GeoCoordinate(0.0, 0.0),
            predicted=GeoCoordinate(0.0, 0.0),
            distance_km=0.0,
            geoscore=5000.0,
            boundary=BoundaryLevel.STREET,
            localizability=tag,
        )
        for i, tag in enumerate([Localizability.MINIMAL_CONTEXT, Localizability.LOCALIZABLE])
    ]
    report = aggregate_by_localizability(outcomes)
    header = render_report(report, "md").splitlines()[0]
    assert header.startswith("| Endpoint | Strategy | Localizability | Street (1 km) |")
    rows = list(csv.reader(io.StringIO(render_report(report, "csv"))))
    assert rows[0][:3] == ["endpoint", "strategy", "group"]
    assert [r[2] for r in rows[1:]] == ["minimal_context", "localizable"]


def test_worst_listing_truncates_reply():
    outcome = PredictionOutcome(
        record_id="r",
        endpoint="m",
        strategy="cot",
        truth=GeoCoordinate(1.0, 2.0),
        raw_text="x" * 2000,
        predicted=GeoCoordinate(3.0, 4.0),
        distance_km=314.0,
        geoscore=4000.0,
        boundary=BoundaryLevel.COUNTRY,
    )
    line = json.loads(render_worst([outcome]))
    assert len(line["raw_text"]) == 500
    assert line["predicted"] == [3.0, 4.0]
    assert line["distance_km"] == 314.0
