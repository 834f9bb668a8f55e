"""Injectable clocks: wall time for live runs, simulated time for replay."""

from __future__ import annotations

import threading
import time
from typing import Protocol


class Clock(Protocol):
    def now(self) -> float: ...

    def sleep_until(self, timestamp: float) -> None: ...


class WallClock:
    def now(self) -> float:
        return time.time()

    def sleep_until(self, timestamp: float) -> None:
        delay = timestamp - time.time()
        if delay > 0:
            time.sleep(delay)


class SimulatedClock:
    """Unix-second clock that only moves when told to; never sleeps.

    Reads and advances are atomic so a mock endpoint thread can share it.
    """

    def __init__(self, start: float = 0) -> None:
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def sleep_until(self, timestamp: float) -> None:
        with self._lock:
            if timestamp > self._now:
                self._now = timestamp

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot move a clock backwards")
        with self._lock:
            self._now += seconds

    def set(self, timestamp: float) -> None:
        with self._lock:
            if timestamp < self._now:
                raise ValueError(f"cannot move clock backwards from {self._now} to {timestamp}")
            self._now = timestamp
