"""Adaptive monitoring loop.

Each iteration forecasts the next horizon from the last ``L`` resolved steps,
scores every metric's forecast spread, and then either trusts the median
forecast for the whole horizon or waits for the horizon to elapse and fetches
the real values of the uncertain metrics. Fetched and substituted values are
merged into the history that feeds the next forecast.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .clock import Clock, SimulatedClock
from .errors import ConfigError, DataError, FetchError
from .forecast.model import TrainedForecaster, fit_seasonal_naive
from .forecast.quantiles import QuantileForecast, draw_samples
from .forecast.training import train
from .series import MultivariateSeries, format_float, slice_series, unscale_array
from .sources.base import MetricSource
from .uncertainty import UncertaintyReport, classify

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonitorConfig:
    input_window: int
    horizon: int
    threshold: float
    n_samples: int = 100
    retrain_window: int = 10
    retrain_fraction: float = 0.5
    seed: int = 0
    fetch_retries: int = 3
    retry_delay: float = 1.0
    # "oracle" feeds the model the recorded truth instead of the resolved
    # history, so forecasts do not depend on the threshold (evaluation only)
    input_mode: Literal["resolved", "oracle"] = "resolved"

    def __post_init__(self) -> None:
        if self.input_window < 1 or self.horizon < 1:
            raise ConfigError("input_window and horizon must be >= 1")
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")
        if not self.threshold >= 0:
            raise ConfigError(f"threshold must be >= 0, got {self.threshold}")
        if self.retrain_window < 1 or not 0.0 < self.retrain_fraction <= 1.0:
            raise ConfigError("retrain_window >= 1 and retrain_fraction in (0, 1] required")
        if self.fetch_retries < 1:
            raise ConfigError("fetch_retries must be >= 1")
        if self.input_mode not in ("resolved", "oracle"):
            raise ConfigError(f"unknown input_mode {self.input_mode!r}")


@dataclass(frozen=True)
class HorizonDecision:
    start_timestamp: int
    end_timestamp: int
    nu: dict[str, float]
    uncertain: frozenset[str]
    degraded: bool = False


@dataclass
class TransmissionLedger:
    metric_names: tuple[str, ...]
    fetched: dict[str, int] = field(default_factory=dict)
    substituted: dict[str, int] = field(default_factory=dict)
    degraded: dict[str, int] = field(default_factory=dict)
    bootstrap_points: int = 0
    decisions: list[HorizonDecision] = field(default_factory=list)

    def __post_init__(self) -> None:
        for m in self.metric_names:
            self.fetched.setdefault(m, 0)
            self.substituted.setdefault(m, 0)
            self.degraded.setdefault(m, 0)

    def total(self, metric: str) -> int:
        return self.fetched[metric] + self.substituted[metric]

    def transmitted_fraction(self, metric: str, after_bootstrap: bool = False) -> float:
        fetched, total = self.fetched[metric], self.total(metric)
        if after_bootstrap:
            fetched -= self.bootstrap_points
            total -= self.bootstrap_points
        return fetched / total if total else 0.0

    def to_csv(self, method: str | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["metric", "fetched", "substituted", "degraded", "transmitted_fraction"]
        w.writerow((["method"] if method else []) + head)
        for m in self.metric_names:
            row = [m, self.fetched[m], self.substituted[m], self.degraded[m],
                   format_float(self.transmitted_fraction(m))]
            w.writerow(([method] if method else []) + row)
        return buf.getvalue()

    def decisions_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["horizon_start", "horizon_end", "metric", "nu", "verdict"])
        for dec in self.decisions:
            for m in self.metric_names:
                if m in dec.uncertain:
                    verdict = "degraded" if dec.degraded else "uncertain"
                else:
                    verdict = "certain"
                w.writerow([dec.start_timestamp, dec.end_timestamp, m, format_float(dec.nu[m]), verdict])
        return buf.getvalue()


@dataclass
class MonitorState:
    cfg: MonitorConfig
    clock: Clock
    metric_names: tuple[str, ...]
    start_timestamp: int
    step: int
    blocks: list[np.ndarray]
    fetched_blocks: list[np.ndarray]
    ledger: TransmissionLedger
    ring: deque
    forecast: QuantileForecast | None = None
    uncertain: frozenset[str] = frozenset()
    last_forecast_time: int | None = None
    horizons: int = 0
    reference: MultivariateSeries | None = None

    @property
    def n_resolved(self) -> int:
        return sum(b.shape[0] for b in self.blocks)

    @property
    def next_timestamp(self) -> int:
        return self.start_timestamp + self.n_resolved * self.step

    def resolved_values(self) -> np.ndarray:
        if len(self.blocks) > 1:
            self.blocks = [np.vstack(self.blocks)]
            self.fetched_blocks = [np.vstack(self.fetched_blocks)]
        return self.blocks[0]

    def fetched_mask(self) -> np.ndarray:
        self.resolved_values()
        return self.fetched_blocks[0]

    def history(self, length: int) -> MultivariateSeries:
        """The most recent ``length`` resolved steps (original units)."""
        values = self.resolved_values()
        if values.shape[0] < length:
            raise DataError(f"only {values.shape[0]} resolved steps, need {length}")
        start = self.start_timestamp + (values.shape[0] - length) * self.step
        return MultivariateSeries(start, values[-length:], self.metric_names, self.step)


def _fetch_with_retry(source: MetricSource, metrics: Sequence[str], start: int, count: int,
                      cfg: MonitorConfig, clock: Clock) -> MultivariateSeries:
    last_exc: FetchError | None = None
    for attempt in range(cfg.fetch_retries):
        try:
            got = source.fetch(list(metrics), start, count)
            if len(got) != count or got.start_timestamp != start:
                raise FetchError(f"expected {count} rows from {start}, got {len(got)} from {got.start_timestamp}")
            return got
        except FetchError as exc:
            last_exc = exc
            log.warning("fetch attempt %d/%d failed: %s", attempt + 1, cfg.fetch_retries, exc)
            if attempt + 1 < cfg.fetch_retries:
                clock.sleep_until(clock.now() + cfg.retry_delay)
    raise FetchError(f"giving up after {cfg.fetch_retries} attempts: {last_exc}") from last_exc


def bootstrap(
    source: MetricSource,
    cfg: MonitorConfig,
    clock: Clock | None = None,
    start_timestamp: int | None = None,
    reference: MultivariateSeries | None = None,
) -> MonitorState:
    """Fetch the first ``L`` steps of every metric to seed the history."""
    clock = clock or SimulatedClock(0)
    start = source.start_timestamp if start_timestamp is None else start_timestamp
    names = tuple(source.metric_names)
    if cfg.input_mode == "oracle" and reference is None:
        raise ConfigError("oracle input mode needs a reference series")
    end = start + (cfg.input_window - 1) * source.step
    clock.sleep_until(end)
    rows = _fetch_with_retry(source, names, start, cfg.input_window, cfg, clock)
    ledger = TransmissionLedger(names)
    for m in names:
        ledger.fetched[m] += cfg.input_window
    ledger.bootstrap_points = cfg.input_window
    return MonitorState(
        cfg=cfg,
        clock=clock,
        metric_names=names,
        start_timestamp=start,
        step=source.step,
        blocks=[rows.values.copy()],
        fetched_blocks=[np.ones(rows.values.shape, dtype=bool)],
        ledger=ledger,
        ring=deque(maxlen=cfg.retrain_window),
        last_forecast_time=end,
        reference=reference,
    )


def _model_input(state: MonitorState, L: int) -> MultivariateSeries:
    if state.cfg.input_mode == "oracle":
        ref = state.reference
        end = ref.index_of(state.next_timestamp) - 1
        if end - L + 1 < 0 or end >= len(ref):
            raise DataError("reference series does not cover the model input window")
        return slice_series(ref, end - L + 1, end).select(state.metric_names)
    return state.history(L)


def step(state: MonitorState, model: TrainedForecaster, source: MetricSource) -> MonitorState:
    """Run one forecast/decide/resolve iteration (mutates and returns ``state``)."""
    cfg = state.cfg
    K = model.config.horizon
    if K != cfg.horizon or model.config.input_window != cfg.input_window:
        raise ConfigError("model window/horizon disagree with the monitor config")
    if tuple(model.metric_names) != state.metric_names:
        raise ConfigError("model metrics disagree with the monitored metrics")

    fs = model.predict(_model_input(state, cfg.input_window))
    samples = draw_samples(fs, cfg.n_samples, seed=[cfg.seed, state.horizons])
    report: UncertaintyReport = classify(samples, cfg.threshold)

    median = unscale_array(fs.values[:, :, fs.quantile_set.median_index], model.bounds)
    block = median.copy()
    fetched = np.zeros(block.shape, dtype=bool)
    start, end = fs.start_timestamp, fs.end_timestamp
    degraded = False
    uncertain = [m for m in state.metric_names if m in report.uncertain_metrics]
    if uncertain:
        state.clock.sleep_until(end)
        try:
            got = _fetch_with_retry(source, uncertain, start, K, cfg, state.clock)
        except FetchError as exc:
            log.error("horizon [%d, %d] degraded to forecasts: %s", start, end, exc)
            degraded = True
        else:
            for j, m in enumerate(state.metric_names):
                if m in report.uncertain_metrics:
                    block[:, j] = got.column(m)
                    fetched[:, j] = True

    for j, m in enumerate(state.metric_names):
        if fetched[0, j]:
            state.ledger.fetched[m] += K
        else:
            state.ledger.substituted[m] += K
            if degraded and m in report.uncertain_metrics:
                state.ledger.degraded[m] += K
    state.ledger.decisions.append(
        HorizonDecision(start, end, dict(report.nu), report.uncertain_metrics, degraded)
    )
    state.blocks.append(block)
    state.fetched_blocks.append(fetched)
    state.forecast = fs
    state.uncertain = report.uncertain_metrics
    state.last_forecast_time = end
    state.ring.append(report.any_uncertain)
    state.horizons += 1
    return state


def should_retrain(state: MonitorState, cfg: MonitorConfig | None = None) -> bool:
    """True once more than ``retrain_fraction`` of the last ``retrain_window``
    horizons had at least one uncertain metric."""
    cfg = cfg or state.cfg
    recent = list(state.ring)[-cfg.retrain_window:]
    if len(recent) < cfg.retrain_window:
        return False
    return sum(recent) / cfg.retrain_window > cfg.retrain_fraction


def retrain(state: MonitorState, model: TrainedForecaster) -> TrainedForecaster:
    """Fit a fresh model of the same kind on the resolved history and clear the
    decision ring. The tail fifth validates when both parts hold a full window."""
    need = model.config.input_window + model.config.horizon
    history = state.history(state.n_resolved) if state.n_resolved >= need else None
    if history is None:
        raise DataError(f"retraining needs {need} resolved steps, have {state.n_resolved}")
    if model.kind == "seasonal_naive":
        new = fit_seasonal_naive(history, model.config, model.period)
    else:
        T = len(history)
        split = int(round(T * 0.8))
        if split >= need and T - split >= need:
            tr, va = slice_series(history, 0, split - 1), slice_series(history, split, T - 1)
        else:
            tr = va = history
        new = train(tr, va, model.config)
    state.ring.clear()
    return new


def reconstruct(state: MonitorState) -> MultivariateSeries:
    """Sink-side view: fetched values verbatim, forecasts (original units) elsewhere."""
    return MultivariateSeries(state.start_timestamp, state.resolved_values(), state.metric_names, state.step)


class AdaptiveMonitor:
    """Convenience driver: bootstrap once, then iterate, optionally retraining
    between horizons when uncertainty becomes frequent."""

    def __init__(
        self,
        model: TrainedForecaster,
        source: MetricSource,
        cfg: MonitorConfig,
        clock: Clock | None = None,
        auto_retrain: bool = False,
        reference: MultivariateSeries | None = None,
        start_timestamp: int | None = None,
    ):
        self.model = model
        self.source = source
        self.cfg = cfg
        self.clock = clock or SimulatedClock(0)
        self.auto_retrain = auto_retrain
        self.retrain_count = 0
        self.state = bootstrap(source, cfg, self.clock, start_timestamp, reference)

    def run(self, n_horizons: int) -> MonitorState:
        for _ in range(n_horizons):
            step(self.state, self.model, self.source)
            if self.auto_retrain and should_retrain(self.state):
                self.model = retrain(self.state, self.model)
                self.retrain_count += 1
        return self.state

    def reconstruct(self) -> MultivariateSeries:
        return reconstruct(self.state)
