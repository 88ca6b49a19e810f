from __future__ import annotations

import argparse
import asyncio
import json
import logging
from pathlib import Path
from typing import Optional, Sequence

from geobench.dataset import ImageRecord, SplitManifest, ingest_manifest
from geobench.errors import ConfigError, GatewayError
from geobench.gateway import ModelEndpoint, load_endpoints
from geobench.prompts import (
    FineTuneRecord,
    PromptStrategy,
    StrategyKind,
    data_generation_strategy,
    export_finetune,
    make_finetune_record,
    render,
)

from .context import EXIT_OK, EXIT_PARTIAL, CommandContext

logger = logging.getLogger(__name__)


def load_descriptions(path: str | Path) -> dict[str, str]:
    """JSONL of {"id": ..., "description": ...} produced offline."""
    out: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                out[str(row["id"])] = str(row["description"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"{path}: line {lineno}: expected id and description: {exc}") from exc
    return out


def _pick_endpoint(endpoints: Sequence[ModelEndpoint], name: Optional[str]) -> ModelEndpoint:
    if name is None:
        if len(endpoints) != 1:
            raise ConfigError("--endpoint is required when the config lists more than one endpoint")
        return endpoints[0]
    for e in endpoints:
        if e.name == name:
            return e
    raise ConfigError(f"endpoint {name!r} not found in config")


async def _generate(
    ctx: CommandContext, records: Sequence[ImageRecord], endpoint: ModelEndpoint
) -> tuple[dict[str, str], int]:
    async with ctx.gateway("finetune_run_log.jsonl") as gateway:

        async def one(record: ImageRecord) -> tuple[str, Optional[str]]:
            try:
                reply = await gateway.query(endpoint, render(data_generation_strategy(record), record))
            except GatewayError as exc:
                logger.warning("Description for %s failed: %s", record.id, exc)
                return record.id, None
            return record.id, reply.raw_text

        results = await asyncio.gather(*(one(r) for r in records))
    descriptions = {rid: text for rid, text in results if text and text.strip()}
    return descriptions, len(records) - len(descriptions)


def cmd_generate_finetune(args: argparse.Namespace, ctx: CommandContext) -> int:
    if bool(args.descriptions) == bool(args.endpoints):
        raise ConfigError("generate-finetune needs exactly one of --descriptions or --endpoints")
    ctx.run_config(
        "generate-finetune",
        {"manifest": args.manifest, "split": args.split, "descriptions": args.descriptions, "endpoints": args.endpoints},
        options={"endpoint": args.endpoint, "with_steps": args.with_steps},
    )

    records = ingest_manifest(args.manifest)
    if args.split:
        train_ids = SplitManifest.load(args.split).train_ids
        records = [r for r in records if r.id in train_ids]

    failed = 0
    if args.descriptions:
        descriptions = load_descriptions(args.descriptions)
    else:
        endpoint = _pick_endpoint(load_endpoints(args.endpoints, default_in_flight=ctx.settings.default_in_flight), args.endpoint)
        descriptions, failed = asyncio.run(_generate(ctx, records, endpoint))

    strategy = PromptStrategy(StrategyKind.CHAIN_OF_THOUGHT, {"with_steps": True} if args.with_steps else {})
    out: list[FineTuneRecord] = []
    for record in records:
        text = descriptions.get(record.id)
        if text is None or not text.strip():
            logger.warning("No description for %s; skipped", record.id)
            continue
        out.append(make_finetune_record(record, text, render(strategy, record).text))

    written = export_finetune(ctx.output("finetune.jsonl"), out)
    skipped = len(records) - written
    logger.info("generate-finetune: %d records written, %d skipped in %s", written, skipped, ctx.elapsed())
    return EXIT_PARTIAL if failed or skipped else EXIT_OK


def setup(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    p = subparsers.add_parser("generate-finetune", parents=parents, help="build the CoT fine-tuning set")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", help="split.json; only train ids are used")
    p.add_argument("--descriptions", help="JSONL of generated descriptions keyed by record id")
    p.add_argument("--endpoints", help="endpoint config used to generate descriptions")
    p.add_argument("--endpoint", help="endpoint name within --endpoints")
    p.add_argument("--with-steps", action="store_true", help="train on the step-by-step CoT prompt")
    p.set_defaults(handler=cmd_generate_finetune)
