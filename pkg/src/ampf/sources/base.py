"""The metric-source interface and the file/series replay implementation."""

from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

from ..clock import Clock
from ..errors import FetchError, MissingMetricError
from ..series import MultivariateSeries, slice_series


@runtime_checkable
class MetricSource(Protocol):
    metric_names: tuple[str, ...]
    start_timestamp: int
    step: int
    supports_backfill: bool

    def fetch(self, metrics: Sequence[str], start: int, count: int) -> MultivariateSeries:
        """Exactly ``count`` rows of ``metrics`` beginning at timestamp ``start``."""
        ...


class ReplaySource:
    """Serves rows of a recorded series, refusing anything not yet "observed"
    according to ``clock`` (when one is given)."""

    supports_backfill = True

    def __init__(self, series: MultivariateSeries, clock: Clock | None = None):
        self.series = series
        self.clock = clock
        self.metric_names = series.metric_names
        self.start_timestamp = series.start_timestamp
        self.step = series.step
        self.requests = 0

    def fetch(self, metrics: Sequence[str], start: int, count: int) -> MultivariateSeries:
        self.requests += 1
        missing = [m for m in metrics if m not in self.metric_names]
        if missing:
            raise MissingMetricError(f"source lacks metrics {missing}")
        if count < 1:
            raise FetchError(f"count must be >= 1, got {count}")
        a = (start - self.start_timestamp) // self.step
        b = a + count - 1
        if (start - self.start_timestamp) % self.step or a < 0 or b >= len(self.series):
            raise FetchError(f"rows for [{start}, +{count}) are outside the recorded series")
        end_ts = self.series.timestamp_at(b)
        if self.clock is not None and end_ts > self.clock.now():
            raise FetchError(f"timestamp {end_ts} lies in the future (now {self.clock.now()})")
        return slice_series(self.series, a, b).select(list(metrics))
