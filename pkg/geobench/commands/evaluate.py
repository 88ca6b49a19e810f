from __future__ import annotations

import argparse
import asyncio
import logging
from typing import Sequence

from geobench.dataset import ImageRecord, SplitManifest, ingest_manifest
from geobench.errors import ConfigError
from geobench.evaluation import (
    FailurePolicy,
    PredictionOutcome,
    aggregate,
    aggregate_by_localizability,
    emit_plot_data,
    render_report,
    render_worst,
    run_campaign,
    worst_predictions,
    write_outcomes,
)
from geobench.gateway import ModelEndpoint, load_endpoints
from geobench.metrics import EarthModel
from geobench.prompts import PromptStrategy, StrategyKind

from .context import EXIT_OK, EXIT_PARTIAL, CommandContext

logger = logging.getLogger(__name__)

DEFAULT_STRATEGIES = "zero-shot,few-shot,cot"
REPORT_EXTENSIONS = {"md": "md", "csv": "csv", "json": "json", "latex": "tex"}


def parse_strategies(value: str, *, with_steps: bool = False) -> list[PromptStrategy]:
    names = [s for s in (part.strip() for part in value.split(",")) if s]
    if not names:
        raise ConfigError("--strategies is empty")
    strategies: list[PromptStrategy] = []
    for name in names:
        try:
            kind = StrategyKind.from_name(name)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        params = {"with_steps": True} if with_steps and kind is StrategyKind.CHAIN_OF_THOUGHT else {}
        strategy = PromptStrategy(kind, params)
        if strategy not in strategies:
            strategies.append(strategy)
    return strategies


async def _campaign(
    ctx: CommandContext,
    records: Sequence[ImageRecord],
    endpoints: Sequence[ModelEndpoint],
    strategies: Sequence[PromptStrategy],
    earth: EarthModel,
) -> list[PredictionOutcome]:
    async with ctx.gateway("run_log.jsonl") as gateway:
        return await run_campaign(records, endpoints, strategies, gateway, earth=earth)


def cmd_evaluate(args: argparse.Namespace, ctx: CommandContext) -> int:
    settings = ctx.settings
    endpoints_path = args.endpoints or settings.endpoints_path
    if not endpoints_path:
        raise ConfigError("--endpoints is required (or set GEOBENCH_ENDPOINTS_PATH)")
    policy = FailurePolicy(args.failure_policy or settings.failure_policy)
    penalty = args.penalty_km if args.penalty_km is not None else settings.penalty_distance_km
    ctx.run_config(
        "evaluate",
        {"test_manifest": args.test_manifest, "endpoints": endpoints_path, "split": args.split},
        failure_policy=policy.value,
        options={"strategies": args.strategies, "penalty_km": penalty, "with_steps": args.with_steps},
    )

    records = ingest_manifest(args.test_manifest)
    if args.split:
        test_ids = SplitManifest.load(args.split).test_ids
        records = [r for r in records if r.id in test_ids]
    endpoints = load_endpoints(endpoints_path, default_in_flight=settings.default_in_flight)
    strategies = parse_strategies(args.strategies, with_steps=args.with_steps)
    earth = EarthModel(settings.earth_radius_km)

    outcomes = asyncio.run(_campaign(ctx, records, endpoints, strategies, earth))
    write_outcomes(ctx.output("outcomes.jsonl"), outcomes)

    report = aggregate(outcomes, policy, penalty)
    ext = REPORT_EXTENSIONS[ctx.fmt]
    ctx.output(f"report.{ext}").write_text(render_report(report, ctx.fmt), encoding="utf-8")
    ctx.output("plot_data.csv").write_text(emit_plot_data(report), encoding="utf-8")
    breakdown = aggregate_by_localizability(outcomes, policy, penalty)
    ctx.output("localizability.md").write_text(render_report(breakdown, "md"), encoding="utf-8")
    ctx.output("worst.jsonl").write_text(render_worst(worst_predictions(outcomes, args.worst_k)), encoding="utf-8")

    errored = sum(1 for o in outcomes if o.gateway_error)
    logger.info("evaluate: %d outcomes, %d gateway errors in %s", len(outcomes), errored, ctx.elapsed())
    if errored:
        logger.error("%d of %d queries failed; report written with failures counted", errored, len(outcomes))
        return EXIT_PARTIAL
    return EXIT_OK


def setup(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    p = subparsers.add_parser("evaluate", parents=parents, help="run models x strategies x test records")
    p.add_argument("--test-manifest", required=True)
    p.add_argument("--split", help="split.json; only test ids are evaluated")
    p.add_argument("--endpoints", help="TOML/JSON endpoint config")
    p.add_argument("--strategies", default=DEFAULT_STRATEGIES, help="comma list of zero-shot, few-shot, cot")
    p.add_argument("--with-steps", action="store_true", help="append the five analysis steps to the cot prompt")
    p.add_argument("--failure-policy", choices=[policy.value for policy in FailurePolicy])
    p.add_argument("--penalty-km", type=float)
    p.add_argument("--worst-k", type=int, default=20)
    p.set_defaults(handler=cmd_evaluate)
