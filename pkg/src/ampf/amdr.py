"""Dual-prediction baseline.

Source and sink each run the same NLMS linear predictor over the last ``M``
reconstructed values of a metric. The source only transmits a value when the
shared prediction misses it by more than ``e_max``; otherwise both ends adopt
the prediction. Because both ends update from the same reconstructed value,
their filters stay identical without any extra messages.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .series import MultivariateSeries


@dataclass(frozen=True)
class DualPredictorConfig:
    filter_order: int = 5
    step_size: float = 0.1
    e_max: float = 0.0
    eps: float = 1e-6

    def __post_init__(self) -> None:
        if self.filter_order < 1:
            raise ConfigError("filter_order must be >= 1")
        if not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if not self.e_max >= 0:
            raise ConfigError("e_max must be >= 0")


class NLMSPredictor:
    """Order-M normalized LMS predictor. Starts as a last-value predictor."""

    def __init__(self, order: int, mu: float, eps: float):
        self.mu = mu
        self.eps = eps
        self.weights = np.zeros(order)
        self.weights[0] = 1.0

    def predict(self, regressor: np.ndarray) -> float:
        return float(self.weights @ regressor)

    def update(self, regressor: np.ndarray, value: float, prediction: float) -> None:
        err = value - prediction
        self.weights = self.weights + self.mu * err * regressor / (self.eps + float(regressor @ regressor))


class _Node:
    """One end of the link: a predictor plus its view of the reconstructed history."""

    def __init__(self, cfg: DualPredictorConfig, warmup: np.ndarray):
        self.cfg = cfg
        self.filter = NLMSPredictor(cfg.filter_order, cfg.step_size, cfg.eps)
        self.history = list(warmup)

    def regressor(self) -> np.ndarray:
        # most recent value first
        return np.array(self.history[-1 : -self.cfg.filter_order - 1 : -1])

    def commit(self, regressor: np.ndarray, value: float, prediction: float) -> None:
        self.filter.update(regressor, value, prediction)
        self.history.append(value)


@dataclass(frozen=True, eq=False)
class DualRunResult:
    transmitted_mask: np.ndarray
    reconstruction: MultivariateSeries
    e_max: float

    @property
    def transmitted_fraction(self) -> dict[str, float]:
        frac = self.transmitted_mask.mean(axis=0)
        return {m: float(f) for m, f in zip(self.reconstruction.metric_names, frac)}


def _run_metric(x: np.ndarray, cfg: DualPredictorConfig, check_sync: bool) -> tuple[np.ndarray, np.ndarray]:
    M = cfg.filter_order
    warm = x[:M]
    source, sink = _Node(cfg, warm), _Node(cfg, warm)
    mask = np.zeros(x.size, dtype=bool)
    mask[:M] = True
    recon = np.empty_like(x)
    recon[:M] = warm
    lossless = cfg.e_max == 0.0
    for t in range(M, x.size):
        reg = source.regressor()
        pred = source.filter.predict(reg)
        transmit = lossless or abs(pred - x[t]) > cfg.e_max
        # the sink only learns x[t] when it is transmitted
        sink_reg = sink.regressor()
        sink_pred = sink.filter.predict(sink_reg)
        value = x[t] if transmit else sink_pred
        source.commit(reg, x[t] if transmit else pred, pred)
        sink.commit(sink_reg, value, sink_pred)
        mask[t] = transmit
        recon[t] = value
        if check_sync and not np.array_equal(source.filter.weights, sink.filter.weights):
            raise RuntimeError(f"source and sink filters diverged at t={t}")
    return mask, recon


def run_dual_prediction(
    source: MultivariateSeries, cfg: DualPredictorConfig, check_sync: bool = True
) -> DualRunResult:
    """Simulate the source/sink pair per metric and return what the sink sees."""
    M = cfg.filter_order
    if len(source) <= M:
        raise DataError(f"series length {len(source)} must exceed filter order {M}")
    masks, recons = [], []
    for j in range(source.n_metrics):
        mask, recon = _run_metric(source.values[:, j], cfg, check_sync)
        masks.append(mask)
        recons.append(recon)
    return DualRunResult(
        np.column_stack(masks), source.with_values(np.column_stack(recons)), cfg.e_max
    )


def sweep_dual(
    source: MultivariateSeries, thresholds: Sequence[float], base: DualPredictorConfig | None = None
) -> list[DualRunResult]:
    if len(thresholds) == 0:
        raise ConfigError("no thresholds given")
    base = base or DualPredictorConfig()
    return [
        run_dual_prediction(
            source, DualPredictorConfig(base.filter_order, base.step_size, float(e), base.eps)
        )
        for e in thresholds
    ]


def dual_ledger_csv(result: DualRunResult) -> str:
    """Per-metric counts in the monitor's ledger schema, tagged ``method=amdr``."""
    import csv
    import io

    from .series import format_float

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "metric", "fetched", "substituted", "degraded", "transmitted_fraction"])
    n = result.transmitted_mask.shape[0]
    for j, m in enumerate(result.reconstruction.metric_names):
        sent = int(result.transmitted_mask[:, j].sum())
        w.writerow(["amdr", m, sent, n - sent, 0, format_float(sent / n)])
    return buf.getvalue()
