"""Forecast uncertainty: per-step sample spread and its horizon average."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .forecast.quantiles import SampleSet


@dataclass(frozen=True)
class UncertaintyReport:
    nu: dict[str, float]
    sigma: dict[str, tuple[float, ...]]
    threshold: float
    uncertain_metrics: frozenset[str]

    @property
    def certain_metrics(self) -> frozenset[str]:
        return frozenset(self.nu) - self.uncertain_metrics

    @property
    def any_uncertain(self) -> bool:
        return bool(self.uncertain_metrics)


def sigma_all(samples: SampleSet) -> np.ndarray:
    """K x d population standard deviations (divisor N)."""
    s = samples.samples
    mu = s.mean(axis=2, keepdims=True)
    return np.sqrt(((s - mu) ** 2).sum(axis=2) / s.shape[2])


def sigma_at_step(samples: SampleSet, metric: str, k: int) -> float:
    """Population standard deviation of the draws at 1-based step ``k``."""
    s = samples.at(metric, k)
    if s.size < 2:
        raise DomainError("need at least two samples")
    mu = s.mean()
    return float(np.sqrt(((s - mu) ** 2).sum() / s.size))


def nu(samples: SampleSet, metric: str) -> float:
    """Mean of the per-step standard deviations over the horizon."""
    j = samples.metric_names.index(metric)
    return float(sigma_all(samples)[:, j].mean())


def classify(samples: SampleSet, threshold: float) -> UncertaintyReport:
    """A metric is uncertain iff its nu strictly exceeds ``threshold``."""
    if not threshold >= 0:
        raise DomainError(f"threshold must be >= 0, got {threshold}")
    sig = sigma_all(samples)
    nus = sig.mean(axis=0)
    names = samples.metric_names
    return UncertaintyReport(
        nu={m: float(v) for m, v in zip(names, nus)},
        sigma={m: tuple(float(x) for x in sig[:, j]) for j, m in enumerate(names)},
        threshold=float(threshold),
        uncertain_metrics=frozenset(m for m, v in zip(names, nus) if v > threshold),
    )
