from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from geobench.errors import ConfigError
from geobench.evaluation import (
    EvaluationReport,
    FailurePolicy,
    aggregate,
    collapse_strategies,
    emit_plot_data,
    read_outcomes,
    render_dataset_matrix,
    render_report,
)

from .context import EXIT_OK, CommandContext

logger = logging.getLogger(__name__)


def parse_sources(values: list[str]) -> dict[str, Path]:
    """`NAME=PATH` or bare `PATH` (named after its directory)."""
    sources: dict[str, Path] = {}
    for value in values:
        name, sep, path = value.partition("=")
        if not sep:
            path, name = value, Path(value).parent.name or Path(value).stem
        if name in sources:
            raise ConfigError(f"dataset name {name!r} given twice; use NAME=PATH")
        sources[name] = Path(path)
    return sources


def cmd_report(args: argparse.Namespace, ctx: CommandContext) -> int:
    sources = parse_sources(args.outcomes)
    policy = FailurePolicy(args.failure_policy or ctx.settings.failure_policy)
    penalty = args.penalty_km if args.penalty_km is not None else ctx.settings.penalty_distance_km
    # data goes to stdout unless an output directory was asked for
    write_files = args.out_dir is not None
    ctx.run_config(
        "report",
        {f"outcomes_{name}": str(path) for name, path in sources.items()},
        failure_policy=policy.value,
        write=write_files,
        options={"penalty_km": penalty, "collapse_strategies": args.collapse_strategies},
    )

    reports: dict[str, EvaluationReport] = {}
    for name, path in sources.items():
        report = aggregate(read_outcomes(path), policy, penalty)
        reports[name] = collapse_strategies(report) if args.collapse_strategies else report

    if len(reports) == 1:
        report = next(iter(reports.values()))
        text = render_report(report, ctx.fmt)
        plot = emit_plot_data(report)
    else:
        if ctx.fmt == "json":
            text = json.dumps({name: r.to_dict() for name, r in reports.items()}, indent=2) + "\n"
        elif ctx.fmt in ("md", "csv"):
            text = render_dataset_matrix(reports, ctx.fmt)
        else:
            raise ConfigError("a multi-dataset report renders as md, csv or json")
        plot = None

    sys.stdout.write(text)
    if write_files:
        ext = {"latex": "tex"}.get(ctx.fmt, ctx.fmt)
        ctx.output(f"report.{ext}").write_text(text, encoding="utf-8")
        if plot is not None:
            ctx.output("plot_data.csv").write_text(plot, encoding="utf-8")
    return EXIT_OK


def setup(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    p = subparsers.add_parser("report", parents=parents, help="re-render reports from outcome files")
    p.add_argument("--outcomes", action="append", required=True, help="outcomes.jsonl, or NAME=PATH; repeatable")
    p.add_argument("--failure-policy", choices=[policy.value for policy in FailurePolicy])
    p.add_argument("--penalty-km", type=float)
    p.add_argument("--collapse-strategies", action="store_true", help="one row per endpoint")
    p.set_defaults(handler=cmd_report)
