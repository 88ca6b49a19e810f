from __future__ import annotations

import json
import logging
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, AsyncIterator, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from geobench import __version__
from geobench.config import Settings
from geobench.db import ReplyStore
from geobench.errors import ConfigError
from geobench.gateway import ModelGateway
from geobench.services.clock import format_duration
from geobench.services.run_log import RunLog

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2

RUN_CONFIG_FILENAME = "run_config.json"


class RunConfig(BaseModel):
    """What a subcommand was asked to do. Written next to its outputs."""

    model_config = ConfigDict(frozen=True)

    subcommand: str
    seed: int
    out_dir: str
    inputs: dict[str, str] = {}
    failure_policy: Optional[str] = None
    format: str = "md"
    options: dict[str, Any] = {}
    version: str = __version__

    @model_validator(mode="after")
    def _inputs_exist(self) -> "RunConfig":
        missing = [f"{path} (--{name.replace('_', '-')})" for name, path in self.inputs.items() if not Path(path).exists()]
        if missing:
            raise ValueError("input file not found: " + ", ".join(missing))
        return self

    def write(self) -> Path:
        out = Path(self.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / RUN_CONFIG_FILENAME
        path.write_text(json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


@dataclass
class CommandContext:
    settings: Settings
    seed: int
    out_dir: Path
    resume: bool
    fmt: str
    started: float = 0.0

    def __post_init__(self) -> None:
        self.started = time.monotonic()

    def run_config(self, subcommand: str, inputs: dict[str, Optional[str]], *, write: bool = True, **fields: Any) -> RunConfig:
        """Validate input paths before any work; record the run (seed included) in the out dir."""
        try:
            cfg = RunConfig(
                subcommand=subcommand,
                seed=self.seed,
                out_dir=str(self.out_dir),
                inputs={k: v for k, v in inputs.items() if v is not None},
                format=self.fmt,
                **fields,
            )
        except ValidationError as exc:
            first = exc.errors()[0]
            raise ConfigError(str(first.get("ctx", {}).get("error") or first["msg"])) from exc
        if write:
            cfg.write()
        return cfg

    def output(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def elapsed(self) -> str:
        return format_duration((time.monotonic() - self.started) * 1000.0)

    @asynccontextmanager
    async def gateway(self, log_name: str) -> AsyncIterator[ModelGateway]:
        """Gateway wired to a run log and the reply store under the out dir.

        Without --resume the log starts empty and stored replies are only written, never read.
        """
        run_log = RunLog(self.output(log_name), truncate=not self.resume)
        async with ReplyStore(self.output(self.settings.store_filename)) as store:
            if self.resume:
                logger.info("Resuming with %d stored replies", await store.count())
            gateway = ModelGateway(run_log, store=store, resume=self.resume, jitter_seed=self.seed)
            try:
                yield gateway
            finally:
                await gateway.close()
                logger.info("Run log: %d lines written to %s", run_log.lines_written, run_log.path)
