from __future__ import annotations

import asyncio
import logging
from collections import deque
from typing import Deque

from .clock import Clock, SystemClock

logger = logging.getLogger(__name__)

WINDOW_SECONDS = 60.0


class SlidingWindowLimiter:
    """At most `limit` acquisitions in any `window` seconds.

    The lock is held while waiting so callers are served in arrival order.
    """

    def __init__(self, limit: int, *, window: float = WINDOW_SECONDS, clock: Clock | None = None) -> None:
        if limit <= 0:
            raise ValueError("rate limit must be positive")
        self.limit = limit
        self.window = window
        self._clock = clock or SystemClock()
        self._stamps: Deque[float] = deque()
        self._lock = asyncio.Lock()

    def _prune(self, now: float) -> None:
        # tolerance keeps float rounding from spinning on a sub-ulp wait
        while self._stamps and now - self._stamps[0] >= self.window - 1e-9:
            self._stamps.popleft()

    async def acquire(self) -> float:
        async with self._lock:
            now = self._clock.monotonic()
            self._prune(now)
            while len(self._stamps) >= self.limit:
                wait = self._stamps[0] + self.window - now
                logger.debug("Rate limit reached (%d/%ss); waiting %.2fs", self.limit, self.window, wait)
                await self._clock.sleep(wait)
                now = self._clock.monotonic()
                self._prune(now)
            self._stamps.append(now)
            return now
