from __future__ import annotations

import argparse
import importlib
import logging
import sys
from pathlib import Path
from typing import NoReturn, Optional, Sequence

from dotenv import find_dotenv, load_dotenv
from pydantic import ValidationError

from .commands.context import EXIT_ERROR, CommandContext
from .config import Settings
from .errors import GeoBenchError
from .evaluation.report import REPORT_FORMATS
from .logging_config import configure_logging

logger = logging.getLogger(__name__)

# subcommand modules under geobench/commands, each exposing setup(subparsers, parents)
COMMAND_MODULES = ["dataset", "finetune", "evaluate", "duel", "report"]


class UsageError(Exception):
    def __init__(self, message: str, usage: str) -> None:
        self.usage = usage
        super().__init__(message)


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises on bad input instead of exiting with status 2."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: error: {message}", self.format_usage())


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="defaults to GEOBENCH_SEED or 1337")
    common.add_argument("--out-dir", help="where outputs go (default GEOBENCH_OUT_DIR)")
    common.add_argument("--config", help="settings file with GEOBENCH_* entries (default .env)")
    common.add_argument("--resume", action="store_true", help="reuse replies stored by an earlier run")
    common.add_argument("--format", choices=REPORT_FORMATS, default="md")
    common.add_argument("--debug", action="store_true")

    parser = ArgumentParser(prog="geobench", description="Geolocation evaluation harness for vision-language models.")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMAND_MODULES:
        module = importlib.import_module(f"geobench.commands.{name}")
        module.setup(subparsers, [common])
    return parser


def _settings(config: Optional[str]) -> Settings:
    if config is None:
        found = find_dotenv(usecwd=True)
        if found:
            load_dotenv(found)
        return Settings()
    if not Path(config).is_file():
        raise GeoBenchError(f"config file not found: {config}")
    load_dotenv(config)
    return Settings(_env_file=config)


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand. 0 ok, 1 input or config error, 2 partial failure."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(exc.usage)
        sys.stderr.write(f"{exc}\n")
        return EXIT_ERROR
    except SystemExit as exc:
        # --help
        return int(exc.code or 0)

    try:
        settings = _settings(args.config)
    except (GeoBenchError, ValidationError) as exc:
        sys.stderr.write(f"geobench: {exc}\n")
        return EXIT_ERROR
    configure_logging(settings.debug or args.debug)

    ctx = CommandContext(
        settings=settings,
        seed=args.seed if args.seed is not None else settings.seed,
        out_dir=Path(args.out_dir or settings.out_dir),
        resume=args.resume,
        fmt=args.format,
    )
    try:
        return args.handler(args, ctx)
    except (GeoBenchError, FileNotFoundError, ValueError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_ERROR
    except Exception:
        logger.exception("%s crashed", args.command)
        return EXIT_ERROR


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
