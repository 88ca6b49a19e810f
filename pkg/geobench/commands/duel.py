from __future__ import annotations

import argparse
import logging

from geobench.duel import (
    FixedErrorOpponent,
    LogNormalOpponent,
    OpponentModel,
    load_match,
    play_match,
    replay_from_match,
    summarize,
    summary_report,
    write_rounds,
)
from geobench.errors import ConfigError
from geobench.metrics import EarthModel

from .context import EXIT_OK, CommandContext

logger = logging.getLogger(__name__)

OPPONENTS = ("replay", "fixed", "lognormal")


def cmd_duel(args: argparse.Namespace, ctx: CommandContext) -> int:
    if ctx.fmt not in ("md", "csv", "json"):
        raise ConfigError("duel summaries render as md, csv or json")
    ctx.run_config(
        "duel",
        {"match": args.match},
        options={"opponent": args.opponent, "opponent_km": args.opponent_km, "opponent_sigma": args.opponent_sigma},
    )
    match = load_match(args.match)

    opponent: OpponentModel
    if args.opponent == "replay":
        # a null opponent guess is a missed round; a file with none at all cannot be replayed
        if all(r.opponent_guess is None for r in match):
            raise ConfigError(f"{args.match} has no opponent guesses to replay; pick --opponent fixed or lognormal")
        opponent = replay_from_match(match)
    elif args.opponent == "fixed":
        opponent = FixedErrorOpponent(args.opponent_km, seed=ctx.seed)
    else:
        opponent = LogNormalOpponent(args.opponent_km, args.opponent_sigma, seed=ctx.seed)

    rounds = play_match([(r.truth, r.agent_guess) for r in match], opponent, EarthModel(ctx.settings.earth_radius_km))
    summary = summarize(rounds)
    write_rounds(ctx.output("duel_rounds.jsonl"), rounds)
    ctx.output("duel_summary.json").write_text(summary_report(summary, "json"), encoding="utf-8")
    labels = {"agent_label": args.agent_label, "opponent_label": args.opponent_label}
    if ctx.fmt != "json":
        ctx.output(f"duel_summary.{ctx.fmt}").write_text(summary_report(summary, ctx.fmt, **labels), encoding="utf-8")
    return EXIT_OK


def setup(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    p = subparsers.add_parser("duel", parents=parents, help="score agent guesses against an opponent")
    p.add_argument("--match", required=True, help="JSONL rounds: truth, agent_guess, optional opponent_guess")
    p.add_argument("--opponent", choices=OPPONENTS, default="replay")
    p.add_argument("--opponent-km", type=float, default=100.0, help="fixed error, or log-normal median")
    p.add_argument("--opponent-sigma", type=float, default=1.0)
    p.add_argument("--agent-label", default="Agent")
    p.add_argument("--opponent-label", default="Human Competitor")
    p.set_defaults(handler=cmd_duel)
