"""Quantile forecasts and inverse-CDF sampling from their knots."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DomainError, ShapeError
from ..series import MultivariateSeries, NormalizationBounds, unscale_array

DEFAULT_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class QuantileSet:
    quantiles: tuple[float, ...] = DEFAULT_QUANTILES

    def __post_init__(self) -> None:
        q = tuple(float(x) for x in self.quantiles)
        if not q:
            raise ConfigError("quantile set is empty")
        if any(not 0.0 < x < 1.0 for x in q):
            raise ConfigError(f"quantiles must lie in (0, 1): {q}")
        if any(b <= a for a, b in zip(q, q[1:])):
            raise ConfigError(f"quantiles must be strictly increasing: {q}")
        if 0.5 not in q:
            raise ConfigError("quantile set must contain the median 0.5")
        object.__setattr__(self, "quantiles", q)

    def __len__(self) -> int:
        return len(self.quantiles)

    @property
    def median_index(self) -> int:
        return self.quantiles.index(0.5)

    def index(self, rho: float) -> int:
        try:
            return self.quantiles.index(float(rho))
        except ValueError:
            raise DomainError(f"quantile {rho} not in {self.quantiles}") from None


@dataclass(frozen=True, eq=False)
class QuantileForecast:
    """K x d x |P| forecast starting at ``start_timestamp``."""

    start_timestamp: int
    values: np.ndarray
    metric_names: tuple[str, ...]
    quantile_set: QuantileSet
    step: int = 1

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 3:
            raise ShapeError(f"forecast values must be K x d x P, got {v.shape}")
        if v.shape[0] < 1:
            raise ShapeError("forecast horizon must be >= 1")
        if v.shape[1] != len(self.metric_names) or v.shape[2] != len(self.quantile_set):
            raise ShapeError(
                f"shape {v.shape} does not match {len(self.metric_names)} metrics x "
                f"{len(self.quantile_set)} quantiles"
            )
        if not np.all(np.isfinite(v)):
            raise ShapeError("forecast contains non-finite values")
        v.sort(axis=2)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "metric_names", tuple(self.metric_names))

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def end_timestamp(self) -> int:
        return self.start_timestamp + (self.horizon - 1) * self.step

    def quantile(self, rho: float) -> MultivariateSeries:
        i = self.quantile_set.index(rho)
        return MultivariateSeries(self.start_timestamp, self.values[:, :, i], self.metric_names, self.step)

    def median(self) -> MultivariateSeries:
        return self.quantile(0.5)

    def denormalized(self, bounds: NormalizationBounds) -> QuantileForecast:
        b = bounds.subset(self.metric_names)
        vals = unscale_array(np.moveaxis(self.values, 2, 1), b)
        return QuantileForecast(
            self.start_timestamp, np.moveaxis(vals, 1, 2), self.metric_names, self.quantile_set, self.step
        )


@dataclass(frozen=True, eq=False)
class SampleSet:
    """K x d x N draws from a forecast's predictive distribution."""

    samples: np.ndarray
    metric_names: tuple[str, ...]

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 3 or s.shape[1] != len(self.metric_names):
            raise ShapeError(f"samples must be K x d x N, got {s.shape}")
        if s.shape[2] < 2:
            raise DomainError("a sample set needs N >= 2 draws")
        if not np.all(np.isfinite(s)):
            raise DomainError("non-finite samples")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "metric_names", tuple(self.metric_names))

    @property
    def horizon(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[2]

    def at(self, metric: str, k: int) -> np.ndarray:
        """Draws for ``metric`` at 1-based horizon step ``k``."""
        if not 1 <= k <= self.horizon:
            raise IndexError(f"horizon step {k} outside 1..{self.horizon}")
        return self.samples[k - 1, self.metric_names.index(metric)]


def inverse_cdf(u: np.ndarray, probs: Sequence[float], knots: np.ndarray) -> np.ndarray:
    """Piecewise-linear quantile function through (probs, knots), flat beyond the ends.

    ``knots`` has the quantile axis last; ``u`` broadcasts against the leading axes
    with one extra trailing draw axis, i.e. ``knots[..., P]`` and ``u[..., N]``.
    """
    p = np.asarray(probs, dtype=np.float64)
    k = np.asarray(knots, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    j = np.clip(np.searchsorted(p, u, side="right") - 1, 0, len(p) - 2) if len(p) > 1 else None
    if j is None:
        return np.broadcast_to(k[..., :1], u.shape).copy()
    lo_p, hi_p = p[j], p[j + 1]
    lo_k = np.take_along_axis(k, j, axis=-1)
    hi_k = np.take_along_axis(k, j + 1, axis=-1)
    w = np.clip((u - lo_p) / (hi_p - lo_p), 0.0, 1.0)
    return lo_k + w * (hi_k - lo_k)


def draw_samples(forecast: QuantileForecast, n: int, seed: int | Sequence[int]) -> SampleSet:
    """Draw ``n`` values per (step, metric) by inverse-CDF sampling of the knots."""
    if n < 2:
        raise DomainError(f"need n >= 2 samples, got {n}")
    rng = np.random.default_rng(seed)
    K, d, _ = forecast.values.shape
    u = rng.random((K, d, n))
    draws = inverse_cdf(u, forecast.quantile_set.quantiles, forecast.values)
    return SampleSet(draws, forecast.metric_names)
