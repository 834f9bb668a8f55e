"""Multivariate time-series container, min-max scaling and calendar features."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, OrderError, ParseError, SchemaError, ShapeError

FEATURE_PREFIX = "feat_"


@dataclass(frozen=True, eq=False)
class MultivariateSeries:
    """T x d matrix of metric values sampled on a regular unix-second grid.

    Row ``t`` is stamped ``start_timestamp + t * step``.
    """

    start_timestamp: int
    values: np.ndarray
    metric_names: tuple[str, ...]
    step: int = 1

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise ShapeError(f"values must be 2-D, got shape {values.shape}")
        names = tuple(str(n) for n in self.metric_names)
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"series needs T >= 1 and d >= 1, got {values.shape}")
        if values.shape[1] != len(names):
            raise ShapeError(f"{values.shape[1]} columns but {len(names)} metric names")
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate metric names in {names}")
        if not np.all(np.isfinite(values)):
            raise DataError("series contains non-finite values")
        step = int(self.step)
        if step <= 0:
            raise DataError(f"step must be a positive integer, got {self.step}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "metric_names", names)
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "start_timestamp", int(self.start_timestamp))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultivariateSeries):
            return NotImplemented
        return (
            self.start_timestamp == other.start_timestamp
            and self.step == other.step
            and self.metric_names == other.metric_names
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def n_metrics(self) -> int:
        return self.values.shape[1]

    @property
    def end_timestamp(self) -> int:
        return self.timestamp_at(len(self) - 1)

    @property
    def timestamps(self) -> np.ndarray:
        return self.start_timestamp + self.step * np.arange(len(self), dtype=np.int64)

    def timestamp_at(self, index: int) -> int:
        return self.start_timestamp + self.step * index

    def index_of(self, timestamp: int) -> int:
        offset = timestamp - self.start_timestamp
        if offset % self.step:
            raise DataError(f"timestamp {timestamp} is off the sampling grid")
        return offset // self.step

    def column(self, metric: str) -> np.ndarray:
        try:
            return self.values[:, self.metric_names.index(metric)]
        except ValueError:
            raise SchemaError(f"unknown metric {metric!r}") from None

    def select(self, metrics: Sequence[str]) -> MultivariateSeries:
        idx = []
        for m in metrics:
            if m not in self.metric_names:
                raise SchemaError(f"unknown metric {m!r}")
            idx.append(self.metric_names.index(m))
        return MultivariateSeries(self.start_timestamp, self.values[:, idx], tuple(metrics), self.step)

    def metric_columns(self) -> MultivariateSeries:
        """Drop appended ``feat_`` columns."""
        keep = [m for m in self.metric_names if not m.startswith(FEATURE_PREFIX)]
        return self.select(keep)

    def slice(self, a: int, b: int) -> MultivariateSeries:
        return slice_series(self, a, b)

    def with_values(self, values: np.ndarray) -> MultivariateSeries:
        return MultivariateSeries(self.start_timestamp, values, self.metric_names, self.step)


def slice_series(series: MultivariateSeries, a: int, b: int) -> MultivariateSeries:
    """Rows ``a..=b`` of ``series`` (inclusive on both ends)."""
    T = len(series)
    if not (0 <= a < T and 0 <= b < T):
        raise IndexError(f"slice [{a}, {b}] out of range for series of length {T}")
    if a > b:
        raise IndexError(f"slice start {a} exceeds end {b}")
    return MultivariateSeries(
        series.timestamp_at(a), series.values[a : b + 1], series.metric_names, series.step
    )


def concat(parts: Sequence[MultivariateSeries]) -> MultivariateSeries:
    """Join temporally adjacent series with identical metrics and step."""
    if not parts:
        raise DataError("nothing to concatenate")
    first = parts[0]
    expected = first.end_timestamp + first.step
    for p in parts[1:]:
        if p.metric_names != first.metric_names or p.step != first.step:
            raise SchemaError("cannot concatenate series with different schemas")
        if p.start_timestamp != expected:
            raise DataError(f"gap or overlap at timestamp {p.start_timestamp} (expected {expected})")
        expected = p.end_timestamp + p.step
    return MultivariateSeries(
        first.start_timestamp, np.vstack([p.values for p in parts]), first.metric_names, first.step
    )


@dataclass(frozen=True)
class NormalizationBounds:
    metric_names: tuple[str, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (len(self.metric_names) == len(self.mins) == len(self.maxs)):
            raise ShapeError("bounds need one (min, max) pair per metric")
        for name, lo, hi in zip(self.metric_names, self.mins, self.maxs):
            if not lo <= hi:
                raise DataError(f"min > max for metric {name!r}")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.mins, dtype=np.float64)

    @property
    def span(self) -> np.ndarray:
        return np.asarray(self.maxs, dtype=np.float64) - self.lo

    def subset(self, metrics: Sequence[str]) -> NormalizationBounds:
        idx = [self.metric_names.index(m) for m in metrics]
        return NormalizationBounds(
            tuple(metrics), tuple(self.mins[i] for i in idx), tuple(self.maxs[i] for i in idx)
        )

    def to_dict(self) -> dict:
        return {"metric_names": list(self.metric_names), "mins": list(self.mins), "maxs": list(self.maxs)}

    @classmethod
    def from_dict(cls, d: dict) -> NormalizationBounds:
        return cls(tuple(d["metric_names"]), tuple(float(x) for x in d["mins"]), tuple(float(x) for x in d["maxs"]))


def fit_bounds(train: MultivariateSeries) -> NormalizationBounds:
    mins = train.values.min(axis=0)
    maxs = train.values.max(axis=0)
    return NormalizationBounds(train.metric_names, tuple(map(float, mins)), tuple(map(float, maxs)))


def _check_bounds(series: MultivariateSeries, bounds: NormalizationBounds) -> None:
    if series.metric_names != bounds.metric_names:
        raise ShapeError(
            f"bounds cover {bounds.metric_names}, series has {series.metric_names}"
        )


def scale_array(values: np.ndarray, bounds: NormalizationBounds) -> np.ndarray:
    """Min-max scale the trailing metric axis. Degenerate metrics map to 0.0."""
    lo, span = bounds.lo, bounds.span
    safe = np.where(span > 0, span, 1.0)
    out = (np.asarray(values, dtype=np.float64) - lo) / safe
    return np.where(span > 0, out, 0.0)


def unscale_array(values: np.ndarray, bounds: NormalizationBounds) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) * bounds.span + bounds.lo


def normalize(series: MultivariateSeries, bounds: NormalizationBounds) -> MultivariateSeries:
    """Map every value x to (x - min) / (max - min). No clamping."""
    _check_bounds(series, bounds)
    return series.with_values(scale_array(series.values, bounds))


def denormalize(series: MultivariateSeries, bounds: NormalizationBounds) -> MultivariateSeries:
    _check_bounds(series, bounds)
    return series.with_values(unscale_array(series.values, bounds))


@dataclass(frozen=True)
class FeatureEncodingConfig:
    enable_second_of_minute_cyclical: bool = True
    enable_month_of_year_cyclical: bool = True
    enable_minute_of_day: bool = True
    enable_workday_weekend: bool = True

    @classmethod
    def none(cls) -> FeatureEncodingConfig:
        return cls(False, False, False, False)

    @property
    def n_features(self) -> int:
        return (
            2 * self.enable_second_of_minute_cyclical
            + 2 * self.enable_month_of_year_cyclical
            + self.enable_minute_of_day
            + self.enable_workday_weekend
        )

    def feature_names(self) -> list[str]:
        names = []
        if self.enable_second_of_minute_cyclical:
            names += ["feat_second_sin", "feat_second_cos"]
        if self.enable_month_of_year_cyclical:
            names += ["feat_month_sin", "feat_month_cos"]
        if self.enable_minute_of_day:
            names.append("feat_minute_of_day")
        if self.enable_workday_weekend:
            names.append("feat_weekend")
        return names


def calendar_features(timestamps: Iterable[int], cfg: FeatureEncodingConfig) -> np.ndarray:
    """Feature matrix (len(timestamps) x cfg.n_features), UTC calendar."""
    ts = np.asarray(list(timestamps), dtype=np.int64)
    cols: list[np.ndarray] = []
    if cfg.n_features == 0:
        return np.zeros((ts.size, 0))
    seconds = ts % 60
    if cfg.enable_second_of_minute_cyclical:
        angle = 2 * np.pi * seconds / 60.0
        cols += [np.sin(angle), np.cos(angle)]
    if cfg.enable_month_of_year_cyclical or cfg.enable_workday_weekend:
        dts = [datetime.fromtimestamp(int(t), tz=timezone.utc) for t in ts]
    if cfg.enable_month_of_year_cyclical:
        month = np.array([dt.month - 1 for dt in dts], dtype=np.float64)
        angle = 2 * np.pi * month / 12.0
        cols += [np.sin(angle), np.cos(angle)]
    if cfg.enable_minute_of_day:
        cols.append(((ts % 86400) // 60) / 1439.0)
    if cfg.enable_workday_weekend:
        cols.append(np.array([1.0 if dt.weekday() >= 5 else 0.0 for dt in dts]))
    out = np.column_stack(cols)
    # exact zeros at the quarter points keep sin^2 + cos^2 tidy for tests
    out[np.abs(out) < 1e-15] = 0.0
    return out


def encode_features(series: MultivariateSeries, cfg: FeatureEncodingConfig) -> MultivariateSeries:
    clash = [m for m in series.metric_names if m.startswith(FEATURE_PREFIX)]
    if clash:
        raise ConfigError(f"metric names use the reserved {FEATURE_PREFIX!r} prefix: {clash}")
    feats = calendar_features(series.timestamps, cfg)
    return MultivariateSeries(
        series.start_timestamp,
        np.hstack([series.values, feats]),
        series.metric_names + tuple(cfg.feature_names()),
        series.step,
    )


# --- CSV ------------------------------------------------------------------

def format_float(x: float) -> str:
    return repr(float(x))


def series_to_csv(series: MultivariateSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp", *series.metric_names])
    for ts, row in zip(series.timestamps, series.values):
        w.writerow([int(ts), *(format_float(v) for v in row)])
    return buf.getvalue()


def write_csv(series: MultivariateSeries, path: str | Path) -> None:
    Path(path).write_text(series_to_csv(series))


def parse_csv(text: str) -> MultivariateSeries:
    """Parse ``timestamp,<metric>...`` text. Gaps and disorder are errors."""
    rows = csv.reader(io.StringIO(text))
    try:
        header = next(rows)
    except StopIteration:
        raise DataError("empty CSV") from None
    if not header or header[0].strip() != "timestamp" or len(header) < 2:
        raise SchemaError("header must be 'timestamp,<metric1>,...'")
    names = [h.strip() for h in header[1:]]
    stamps: list[int] = []
    values: list[list[float]] = []
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header) or any(not c.strip() for c in row):
            raise SchemaError(f"line {lineno}: expected {len(header)} non-empty fields, got {row}")
        try:
            ts = int(row[0])
            vals = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite value", lineno)
        if stamps:
            if ts <= stamps[-1]:
                raise OrderError(f"timestamp {ts} not after {stamps[-1]}", lineno)
            if len(stamps) >= 2 and ts - stamps[-1] != stamps[1] - stamps[0]:
                raise ParseError(f"gap at timestamp {ts}", lineno)
        stamps.append(ts)
        values.append(vals)
    if not stamps:
        raise DataError("CSV has a header but no rows")
    step = stamps[1] - stamps[0] if len(stamps) > 1 else 1
    return MultivariateSeries(stamps[0], np.array(values), tuple(names), step)
