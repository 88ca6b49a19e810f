from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from .clock import utc_iso

logger = logging.getLogger(__name__)


@dataclass
class RunLogEntry:
    endpoint: str
    fingerprint: str
    status: str
    latency_ms: float
    attempt: int
    temperature: float
    prompt_role: str
    raw_text: Optional[str] = None
    error: Optional[str] = None
    timestamp: str = ""

    def to_json(self) -> str:
        payload = asdict(self)
        if not payload["timestamp"]:
            payload["timestamp"] = utc_iso()
        # optional fields are omitted rather than written as null
        for key in ("raw_text", "error"):
            if payload[key] is None:
                del payload[key]
        return json.dumps(payload, ensure_ascii=False)


class RunLog:
    """Append-only JSONL log of model query attempts.

    All writes go through one lock, so concurrent queries never interleave lines.
    Without a path the log lives in `entries`; a file-backed log keeps nothing in memory.
    """

    def __init__(self, path: str | Path | None, *, truncate: bool = False) -> None:
        self.path = Path(path) if path is not None else None
        self.lines_written = 0
        self._lock = asyncio.Lock()
        self.entries: list[RunLogEntry] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if truncate:
                self.path.write_text("", encoding="utf-8")

    async def append(self, entry: RunLogEntry) -> None:
        line = entry.to_json()
        async with self._lock:
            self.lines_written += 1
            if self.path is None:
                self.entries.append(entry)
                return
            try:
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(line + "\n")
            except OSError:
                logger.exception("RunLog: failed to append to %s", self.path)
                raise

    @staticmethod
    def read(path: str | Path) -> list[dict]:
        rows = []
        with Path(path).open("r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    rows.append(json.loads(line))
        return rows
