"""Metric source backed by a scrapeable HTTP endpoint with CSV backfill."""

from __future__ import annotations

import math
from typing import Sequence

from ..clock import Clock, WallClock
from ..errors import DataError, FetchError, MissingMetricError
from ..series import MultivariateSeries, parse_csv
from .exposition import ScrapeStats, http_get, scrape


class LiveSource:
    supports_backfill = True

    def __init__(
        self,
        endpoint: str,
        metric_names: Sequence[str],
        start_timestamp: int | None = None,
        step: int = 1,
        clock: Clock | None = None,
        timeout: float = 5.0,
    ):
        self.endpoint = endpoint
        self.metric_names = tuple(metric_names)
        self.clock = clock or WallClock()
        self.start_timestamp = int(self.clock.now()) if start_timestamp is None else int(start_timestamp)
        self.step = step
        self.timeout = timeout
        self.stats = ScrapeStats()
        self.requests = 0

    def scrape(self) -> MultivariateSeries:
        return scrape(self.endpoint, self.metric_names, self.clock, self.timeout, self.stats)

    def fetch(self, metrics: Sequence[str], start: int, count: int) -> MultivariateSeries:
        self.requests += 1
        missing = [m for m in metrics if m not in self.metric_names]
        if missing:
            raise MissingMetricError(f"source lacks metrics {missing}")
        end = start + (count - 1) * self.step
        lag = max(0, math.floor((self.clock.now() - end) / self.step))
        text = http_get(f"{self.endpoint}?backfill={count + lag}", self.timeout)
        try:
            rows = parse_csv(text)
        except DataError as exc:
            raise FetchError(f"bad backfill payload: {exc}") from exc
        if rows.start_timestamp > start or rows.end_timestamp < end:
            raise FetchError(
                f"backfill covered [{rows.start_timestamp}, {rows.end_timestamp}], needed [{start}, {end}]"
            )
        a = rows.index_of(start)
        absent = [m for m in metrics if m not in rows.metric_names]
        if absent:
            raise MissingMetricError(f"endpoint does not expose {absent}")
        return rows.slice(a, a + count - 1).select(list(metrics))
