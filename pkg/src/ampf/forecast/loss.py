"""Pinball (quantile) loss and the aggregate scores built on it."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import DegenerateMetric, DomainError, SchemaError, ShapeError
from ..series import MultivariateSeries
from .quantiles import QuantileForecast


def _check_rho(rho) -> None:
    r = np.asarray(rho)
    if np.any((r <= 0.0) | (r >= 1.0)):
        raise DomainError(f"quantile level must lie in (0, 1), got {rho}")


def pinball_loss(y: float, y_hat: float, rho: float) -> float:
    _check_rho(rho)
    return rho * max(0.0, y - y_hat) + (1.0 - rho) * max(0.0, y_hat - y)


def pinball_array(y: np.ndarray, y_hat: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Elementwise pinball loss; all three arguments broadcast."""
    _check_rho(rho)
    diff = np.asarray(y, dtype=np.float64) - np.asarray(y_hat, dtype=np.float64)
    return rho * np.maximum(0.0, diff) + (1.0 - rho) * np.maximum(0.0, -diff)


def pinball_grad(y: np.ndarray, y_hat: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """d(pinball)/d(y_hat); zero at the kink."""
    diff = y - y_hat
    return np.where(diff > 0, -rho, np.where(diff < 0, 1.0 - rho, 0.0))


def window_loss(y: np.ndarray, y_hat: np.ndarray, quantiles: Sequence[float]) -> float:
    """Mean pinball loss of ``y_hat[..., P]`` against ``y[...]``."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y_hat.shape != y.shape + (len(quantiles),):
        raise ShapeError(f"prediction shape {y_hat.shape} vs truth {y.shape} x {len(quantiles)}")
    rho = np.asarray(quantiles, dtype=np.float64)
    return float(pinball_array(y[..., None], y_hat, rho).mean())


def _aligned_truth(truth: MultivariateSeries, fc: QuantileForecast) -> np.ndarray:
    if fc.step != truth.step:
        raise ShapeError("forecast and truth use different steps")
    missing = [m for m in fc.metric_names if m not in truth.metric_names]
    if missing:
        raise ShapeError(f"truth lacks metrics {missing}")
    offset = fc.start_timestamp - truth.start_timestamp
    if offset % truth.step:
        raise ShapeError("forecast is off the truth's sampling grid")
    a = offset // truth.step
    b = a + fc.horizon
    if a < 0 or b > len(truth):
        raise ShapeError(
            f"forecast window [{fc.start_timestamp}, {fc.end_timestamp}] not covered by truth"
        )
    cols = [truth.metric_names.index(m) for m in fc.metric_names]
    return truth.values[a:b][:, cols]


def total_loss(truth: MultivariateSeries, forecasts: Sequence[QuantileForecast]) -> float:
    """Pinball loss summed over origins, quantiles, horizon steps and metrics,
    divided by the number of terms."""
    if isinstance(forecasts, QuantileForecast):
        forecasts = [forecasts]
    if not forecasts:
        raise ShapeError("no forecast windows given")
    total = 0.0
    count = 0
    for fc in forecasts:
        y = _aligned_truth(truth, fc)
        rho = np.asarray(fc.quantile_set.quantiles)
        terms = pinball_array(y[..., None], fc.values, rho)
        total += float(terms.sum())
        count += terms.size
    return total / count


def rho_risk(
    truth: MultivariateSeries,
    forecasts: QuantileForecast | Sequence[QuantileForecast],
    rho: float,
    metric: str | None = None,
) -> float:
    """Normalized quantile risk 2 * sum(pinball) / sum(|y|) at level ``rho``."""
    _check_rho(rho)
    if isinstance(forecasts, QuantileForecast):
        forecasts = [forecasts]
    num = 0.0
    den = 0.0
    for fc in forecasts:
        y = _aligned_truth(truth, fc)
        pred = fc.values[:, :, fc.quantile_set.index(rho)]
        if metric is not None:
            if metric not in fc.metric_names:
                raise SchemaError(f"unknown metric {metric!r}")
            j = fc.metric_names.index(metric)
            y, pred = y[:, j], pred[:, j]
        num += float(pinball_array(y, pred, rho).sum())
        den += float(np.abs(y).sum())
    if den == 0.0:
        raise DegenerateMetric("rho-risk undefined for all-zero truth")
    return 2.0 * num / den
