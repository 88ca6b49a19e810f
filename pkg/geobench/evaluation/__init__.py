from .aggregate import (
    DEFAULT_PENALTY_KM,
    EvaluationReport,
    FailurePolicy,
    ReportRow,
    aggregate,
    aggregate_by_localizability,
    collapse_strategies,
    merge_rows,
    worst_predictions,
)
from .outcomes import PredictionOutcome, read_outcomes, run_campaign, score_reply, write_outcomes
from .report import REPORT_FORMATS, emit_plot_data, render_dataset_matrix, render_report, render_worst

__all__ = [
    "DEFAULT_PENALTY_KM",
    "EvaluationReport",
    "FailurePolicy",
    "PredictionOutcome",
    "REPORT_FORMATS",
    "ReportRow",
    "aggregate",
    "aggregate_by_localizability",
    "collapse_strategies",
    "emit_plot_data",
    "merge_rows",
    "read_outcomes",
    "render_dataset_matrix",
    "render_report",
    "render_worst",
    "run_campaign",
    "score_reply",
    "write_outcomes",
    "worst_predictions",
]
