from __future__ import annotations

import aiosqlite
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

from .services.clock import now_ts

logger = logging.getLogger(__name__)

DEFAULT_SCHEMA = """
CREATE TABLE IF NOT EXISTS replies (
    endpoint TEXT NOT NULL,
    fingerprint TEXT NOT NULL,
    raw_text TEXT NOT NULL,
    latency_ms REAL NOT NULL,
    attempt_count INTEGER NOT NULL,
    created_at INTEGER NOT NULL,
    PRIMARY KEY (endpoint, fingerprint)
);
"""

_UPSERT_REPLY_SQL = """
REPLACE INTO replies (endpoint, fingerprint, raw_text, latency_ms, attempt_count, created_at)
VALUES (?, ?, ?, ?, ?, ?)
"""
_SELECT_REPLY_SQL = (
    "SELECT endpoint, fingerprint, raw_text, latency_ms, attempt_count FROM replies "
    "WHERE endpoint = ? AND fingerprint = ?;"
)
_COUNT_REPLIES_SQL = "SELECT COUNT(*) AS n FROM replies;"


@dataclass
class StoredReply:
    endpoint: str
    fingerprint: str
    raw_text: str
    latency_ms: float
    attempt_count: int


class ReplyStore:
    """Successful model replies keyed by (endpoint, fingerprint); the resume index."""

    def __init__(self, path: str | Path) -> None:
        self.path = str(path)
        self._conn: Optional[aiosqlite.Connection] = None

    async def connect(self) -> None:
        logger.info("Opening reply store at %s", self.path)
        Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = await aiosqlite.connect(self.path)
        self._conn.row_factory = aiosqlite.Row
        await self._conn.commit()
        logger.debug("Reply store connection established")

    async def close(self) -> None:
        if self._conn:
            await self._conn.close()
            self._conn = None
            logger.debug("Reply store connection closed")

    async def __aenter__(self) -> "ReplyStore":
        await self.connect()
        await self.bootstrap()
        return self

    async def __aexit__(self, *exc: object) -> None:
        await self.close()

    def _ensure_conn(self) -> aiosqlite.Connection:
        if not self._conn:
            raise RuntimeError("Reply store is not open. Call connect() first.")
        return self._conn

    async def bootstrap(self, schema_sql: str = DEFAULT_SCHEMA) -> None:
        """Create the schema (safe to call on every start)."""
        conn = self._ensure_conn()
        await conn.executescript(schema_sql)
        await conn.commit()

    async def execute(self, sql: str, params: Optional[Iterable[Any]] = None) -> Optional[int]:
        conn = self._ensure_conn()
        async with conn.execute(sql, tuple(params or [])) as cur:
            await conn.commit()
            return cur.lastrowid

    async def fetchone(self, sql: str, params: Optional[Iterable[Any]] = None) -> Optional[aiosqlite.Row]:
        conn = self._ensure_conn()
        async with conn.execute(sql, tuple(params or [])) as cur:
            return await cur.fetchone()

    async def get_reply(self, endpoint: str, fingerprint: str) -> Optional[StoredReply]:
        row = await self.fetchone(_SELECT_REPLY_SQL, (endpoint, fingerprint))
        if row is None:
            return None
        return StoredReply(
            endpoint=row["endpoint"],
            fingerprint=row["fingerprint"],
            raw_text=row["raw_text"],
            latency_ms=float(row["latency_ms"]),
            attempt_count=int(row["attempt_count"]),
        )

    async def put_reply(self, reply: StoredReply) -> None:
        await self.execute(
            _UPSERT_REPLY_SQL,
            (reply.endpoint, reply.fingerprint, reply.raw_text, reply.latency_ms, reply.attempt_count, now_ts()),
        )

    async def count(self) -> int:
        row = await self.fetchone(_COUNT_REPLIES_SQL)
        return int(row["n"]) if row else 0
