"""filter, sample and split: the dataset preparation stages."""
from __future__ import annotations

import argparse
import asyncio
import json
import logging
from typing import Sequence

from geobench.dataset import (
    FilterResult,
    HttpEmbeddingProvider,
    ImageRecord,
    TableEmbeddingProvider,
    filter_records,
    ingest_manifest,
    load_country_areas,
    sample_by_area,
    split,
    write_manifest,
)
from geobench.dataset.records import record_to_row
from geobench.errors import ConfigError

from .context import EXIT_OK, EXIT_PARTIAL, CommandContext

logger = logging.getLogger(__name__)


async def _run_filter(
    records: Sequence[ImageRecord],
    provider: TableEmbeddingProvider | HttpEmbeddingProvider,
    threshold: float,
    aggregation: str,
    concurrency: int,
) -> list[FilterResult]:
    try:
        return await filter_records(
            records, provider, threshold=threshold, aggregation=aggregation, concurrency=concurrency
        )
    finally:
        if isinstance(provider, HttpEmbeddingProvider):
            await provider.close()


def cmd_filter(args: argparse.Namespace, ctx: CommandContext) -> int:
    if not args.embeddings and not args.embedding_url:
        raise ConfigError("filter needs --embeddings or --embedding-url")
    settings = ctx.settings
    threshold = args.threshold if args.threshold is not None else settings.indoor_threshold
    aggregation = args.aggregation or settings.indoor_aggregation
    source = args.source or settings.embedding_source
    ctx.run_config(
        "filter",
        {"manifest": args.manifest, "embeddings": args.embeddings},
        options={
            "threshold": threshold,
            "aggregation": aggregation,
            "embedding_source": source,
            "embedding_url": args.embedding_url,
        },
    )

    records = ingest_manifest(args.manifest)
    if args.embeddings:
        provider: TableEmbeddingProvider | HttpEmbeddingProvider = TableEmbeddingProvider.from_json(
            args.embeddings, source=source
        )
    else:
        provider = HttpEmbeddingProvider(args.embedding_url, token_env=args.embedding_token_env, source=source)

    results = asyncio.run(_run_filter(records, provider, threshold, aggregation, settings.filter_concurrency))

    kept = [r for r in results if r.kept]
    write_manifest(
        ctx.output("filtered.jsonl"),
        [r.record for r in kept],
        extras={r.record.id: {"filter_decision": r.decision.value} for r in kept},
    )
    rejected = [r for r in results if not r.kept]
    with ctx.output("filter_rejected.jsonl").open("w", encoding="utf-8", newline="\n") as handle:
        for r in rejected:
            extra = {"filter_decision": r.decision.value if r.decision else "error"}
            if r.error:
                extra["filter_error"] = r.error
            handle.write(json.dumps(record_to_row(r.record, **extra), ensure_ascii=False) + "\n")

    errors = sum(1 for r in rejected if r.error)
    logger.info(
        "filter: kept %d, excluded %d, errors %d (source=%s) in %s",
        len(kept), len(rejected) - errors, errors, source, ctx.elapsed(),
    )
    return EXIT_PARTIAL if errors else EXIT_OK


def cmd_sample(args: argparse.Namespace, ctx: CommandContext) -> int:
    if args.total <= 0:
        raise ConfigError("--total must be positive")
    ctx.run_config("sample", {"manifest": args.manifest, "areas": args.areas}, options={"total": args.total})
    records = ingest_manifest(args.manifest)
    areas = load_country_areas(args.areas)
    sampled = sample_by_area(records, areas, args.total, ctx.seed)
    write_manifest(ctx.output("sampled.jsonl"), sampled)
    logger.info("sample: %d of %d records selected (seed=%d)", len(sampled), len(records), ctx.seed)
    return EXIT_OK


def cmd_split(args: argparse.Namespace, ctx: CommandContext) -> int:
    if not 0.0 < args.train_fraction < 1.0:
        raise ConfigError("--train-fraction must be between 0 and 1 (exclusive)")
    ctx.run_config("split", {"manifest": args.manifest}, options={"train_fraction": args.train_fraction})
    records = ingest_manifest(args.manifest)
    manifest = split(records, args.train_fraction, ctx.seed)
    ctx.output("split.json").write_text(manifest.to_json(), encoding="utf-8")
    write_manifest(ctx.output("train.jsonl"), [r for r in records if r.id in manifest.train_ids])
    write_manifest(ctx.output("test.jsonl"), [r for r in records if r.id in manifest.test_ids])
    return EXIT_OK


def setup(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    p = subparsers.add_parser("filter", parents=parents, help="drop indoor multi-view records")
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", help="JSON table of image uri -> embedding vector")
    p.add_argument("--embedding-url", help="remote embedding service")
    p.add_argument("--embedding-token-env", help="environment variable holding the service token")
    p.add_argument("--threshold", type=float)
    p.add_argument("--aggregation", choices=["mean", "min", "max"])
    p.add_argument("--source", choices=["image", "caption"])
    p.set_defaults(handler=cmd_filter)

    p = subparsers.add_parser("sample", parents=parents, help="area-proportional sampling by country")
    p.add_argument("--manifest", required=True)
    p.add_argument("--areas", required=True, help="CSV with country_code,area_km2")
    p.add_argument("--total", type=int, required=True)
    p.set_defaults(handler=cmd_sample)

    p = subparsers.add_parser("split", parents=parents, help="seeded train/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-fraction", type=float, default=0.6)
    p.set_defaults(handler=cmd_split)
