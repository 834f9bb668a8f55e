"""Forecaster configuration, trained-model container, prediction and persistence."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from ..errors import ConfigError, SchemaError, ShapeError
from ..series import (
    FeatureEncodingConfig,
    MultivariateSeries,
    NormalizationBounds,
    calendar_features,
    scale_array,
)
from . import network
from .quantiles import QuantileForecast, QuantileSet


@dataclass(frozen=True)
class ForecastModelConfig:
    """Hyperparameters. Defaults are the best Table-I-style configuration."""

    input_window: int = 300
    horizon: int = 300
    hidden_dim: int = 75
    batch_size: int = 256
    dropout_rate: float = 0.20
    learning_rate: float = 0.001
    max_epochs: int = 20
    quantile_set: QuantileSet = field(default_factory=QuantileSet)
    seed: int = 0
    features: FeatureEncodingConfig = field(default_factory=FeatureEncodingConfig)
    window_stride: int = 1
    clip_norm: float = 1.0
    early_stopping_delta: float = 0.001
    early_stopping_patience: int = 5

    def __post_init__(self) -> None:
        for name in ("input_window", "horizon", "hidden_dim", "batch_size", "max_epochs", "window_stride"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not self.clip_norm > 0:
            raise ConfigError("clip_norm must be positive")
        if isinstance(self.quantile_set, (list, tuple)):
            object.__setattr__(self, "quantile_set", QuantileSet(tuple(self.quantile_set)))
        if isinstance(self.features, dict):
            object.__setattr__(self, "features", FeatureEncodingConfig(**self.features))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quantile_set"] = list(self.quantile_set.quantiles)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ForecastModelConfig:
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        if "quantile_set" in d:
            d["quantile_set"] = QuantileSet(tuple(d["quantile_set"]))
        if "features" in d and isinstance(d["features"], dict):
            d["features"] = FeatureEncodingConfig(**d["features"])
        return cls(**d)

    def with_(self, **changes) -> ForecastModelConfig:
        return replace(self, **changes)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    validation_loss: float


@dataclass(eq=False)
class TrainedForecaster:
    """A fitted forecaster; ``predict`` works on original-unit inputs and returns
    forecasts in normalized units (the scale uncertainty is judged on)."""

    kind: Literal["neural", "seasonal_naive"]
    parameters: dict[str, np.ndarray]
    config: ForecastModelConfig
    bounds: NormalizationBounds
    training_report: list[EpochRecord] = field(default_factory=list)
    period: int = 0

    @property
    def metric_names(self) -> tuple[str, ...]:
        return self.bounds.metric_names

    @property
    def input_window(self) -> int:
        return self.config.input_window

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def predict(self, inputs: MultivariateSeries) -> QuantileForecast:
        return predict(self, inputs)

    def save(self, path: str | Path) -> None:
        save_model(self, path)


def _prepare_input(model: TrainedForecaster, inputs: MultivariateSeries) -> MultivariateSeries:
    if len(inputs) != model.config.input_window:
        raise ShapeError(f"input has {len(inputs)} rows, model expects exactly {model.config.input_window}")
    unknown = [m for m in inputs.metric_names if m not in model.metric_names]
    missing = [m for m in model.metric_names if m not in inputs.metric_names]
    if unknown or missing:
        raise SchemaError(f"metric mismatch: unknown {unknown}, missing {missing}")
    return inputs.select(model.metric_names)


def encoder_inputs(scaled: np.ndarray, timestamps: np.ndarray, features: FeatureEncodingConfig) -> np.ndarray:
    return np.hstack([scaled, calendar_features(timestamps, features)])


def predict(model: TrainedForecaster, inputs: MultivariateSeries) -> QuantileForecast:
    """Forecast the ``K`` steps that follow ``inputs`` (dropout off; deterministic)."""
    inputs = _prepare_input(model, inputs)
    cfg = model.config
    start = inputs.end_timestamp + inputs.step
    scaled = scale_array(inputs.values, model.bounds)
    if model.kind == "seasonal_naive":
        values = _naive_knots(model, scaled)
    else:
        enc = encoder_inputs(scaled, inputs.timestamps, cfg.features)[None]
        dec_ts = start + inputs.step * np.arange(cfg.horizon - 1)
        dec = calendar_features(dec_ts, cfg.features)[None]
        qs = cfg.quantile_set
        out, _ = network.forward(
            model.parameters, enc, dec, len(model.metric_names), len(qs), qs.median_index
        )
        values = out[0]
    return QuantileForecast(start, values, model.metric_names, cfg.quantile_set, inputs.step)


def _naive_knots(model: TrainedForecaster, scaled: np.ndarray) -> np.ndarray:
    p = model.period
    L = scaled.shape[0]
    if p > L:
        raise ShapeError(f"seasonal period {p} exceeds input window {L}")
    K = model.config.horizon
    # step k (1-based) copies the value one whole number of periods back
    idx = np.array([L - p + ((k - 1) % p) for k in range(1, K + 1)])
    median = scaled[idx]  # K x d
    offsets = model.parameters["offsets"]  # d x P
    return median[:, :, None] + offsets[None, :, :]


def fit_seasonal_naive(
    train: MultivariateSeries, cfg: ForecastModelConfig, period: int | None = None
) -> TrainedForecaster:
    """Median = value one period earlier; other knots offset by empirical
    residual quantiles of the training data (relative to the residual median)."""
    from ..series import fit_bounds

    if period is None:
        period = 86400 // train.step
    if period < 1 or period >= len(train):
        raise ConfigError(f"period {period} unusable for training length {len(train)}")
    bounds = fit_bounds(train)
    scaled = scale_array(train.values, bounds)
    resid = scaled[period:] - scaled[:-period]
    qs = np.asarray(cfg.quantile_set.quantiles)
    resq = np.quantile(resid, qs, axis=0).T  # d x P
    offsets = resq - resq[:, [cfg.quantile_set.median_index]]
    return TrainedForecaster("seasonal_naive", {"offsets": offsets}, cfg, bounds, [], int(period))


# --- persistence ------------------------------------------------------------

def save_model(model: TrainedForecaster, path: str | Path) -> None:
    """One ``.npz`` file: a JSON header plus the flat weight arrays."""
    meta = {
        "format": "ampf-forecaster/1",
        "kind": model.kind,
        "config": model.config.to_dict(),
        "bounds": model.bounds.to_dict(),
        "period": model.period,
        "training_report": [asdict(r) for r in model.training_report],
        "arrays": {k: list(v.shape) for k, v in model.parameters.items()},
    }
    arrays = {f"param_{k}": v for k, v in model.parameters.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8), **arrays)


def load_model(path: str | Path) -> TrainedForecaster:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(z["__meta__"].tobytes().decode())
        if meta.get("format") != "ampf-forecaster/1":
            raise SchemaError(f"{path}: not an ampf forecaster file")
        params = {k: z[f"param_{k}"].copy() for k in meta["arrays"]}
    for k, shape in meta["arrays"].items():
        if list(params[k].shape) != shape:
            raise SchemaError(f"{path}: array {k} has shape {params[k].shape}, header says {shape}")
    return TrainedForecaster(
        kind=meta["kind"],
        parameters=params,
        config=ForecastModelConfig.from_dict(meta["config"]),
        bounds=NormalizationBounds.from_dict(meta["bounds"]),
        training_report=[EpochRecord(**r) for r in meta["training_report"]],
        period=meta["period"],
    )
