from __future__ import annotations

import asyncio
import time
from datetime import datetime, timezone
from typing import Protocol


def now_ts() -> int:
    return int(datetime.now(timezone.utc).timestamp())


def utc_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def format_duration(ms: float) -> str:
    secs = int(ms // 1000)
    if secs < 1:
        return f"{ms:.0f}ms"
    if secs < 60:
        return f"{ms / 1000:.1f}s"
    if secs < 3600:
        return f"{secs // 60}m{secs % 60}s"
    return f"{secs // 3600}h{(secs % 3600) // 60}m"


class Clock(Protocol):
    def monotonic(self) -> float: ...

    async def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def monotonic(self) -> float:
        return time.monotonic()

    async def sleep(self, seconds: float) -> None:
        await asyncio.sleep(seconds)


class VirtualClock:
    """Clock whose sleep advances time instantly. Used for backoff and rate-limit tests."""

    def __init__(self, start: float = 0.0) -> None:
        self.now = start
        self.sleeps: list[float] = []

    def monotonic(self) -> float:
        return self.now

    async def sleep(self, seconds: float) -> None:
        self.sleeps.append(seconds)
        self.now += max(0.0, seconds)
        # yield so other tasks get scheduled like with a real sleep
        await asyncio.sleep(0)
