"""Mini-batch SGD training with early stopping, grid search and forward-chaining K-fold."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigError, DataError, SchemaError, TrainingDiverged
from ..series import MultivariateSeries, calendar_features, fit_bounds, scale_array, slice_series
from . import network
from .loss import pinball_array
from .model import EpochRecord, ForecastModelConfig, TrainedForecaster

log = logging.getLogger(__name__)


class EarlyStopping:
    """Stop once the validation loss has failed to improve on its reference
    value by more than ``min_delta`` for ``patience`` consecutive epochs.

    The reference only moves on a significant improvement; the best raw loss
    (whose weights are restored) is tracked separately.
    """

    def __init__(self, min_delta: float = 0.001, patience: int = 5):
        self.min_delta = min_delta
        self.patience = patience
        self.reference = np.inf
        self.best = np.inf
        self.best_epoch = 0
        self.stale = 0
        self.epoch = 0

    def update(self, loss: float) -> bool:
        """Record one epoch's validation loss; return True if training should stop."""
        self.epoch += 1
        if loss < self.best:
            self.best = loss
            self.best_epoch = self.epoch
        # guard against float noise deciding "exactly min_delta" cases
        if self.reference - loss - self.min_delta > 1e-12:
            self.reference = loss
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def stopping_epoch(losses: Iterable[float], min_delta: float = 0.001, patience: int = 5) -> int | None:
    """Epoch (1-based) after which training halts for a loss trace, or None."""
    es = EarlyStopping(min_delta, patience)
    for loss in losses:
        if es.update(loss):
            return es.epoch
    return None


@dataclass
class WindowSet:
    enc: np.ndarray   # n x L x (d + f)
    dec: np.ndarray   # n x (K - 1) x f
    target: np.ndarray  # n x K x d

    def __len__(self) -> int:
        return self.enc.shape[0]


def make_windows(series: MultivariateSeries, bounds, cfg: ForecastModelConfig, stride: int | None = None) -> WindowSet:
    """Sliding (L inputs -> next K targets) windows over the scaled series."""
    L, K = cfg.input_window, cfg.horizon
    T = len(series)
    if T < L + K:
        raise DataError(f"series of length {T} is shorter than input window + horizon = {L + K}")
    stride = cfg.window_stride if stride is None else stride
    scaled = scale_array(series.values, bounds)
    feats = calendar_features(series.timestamps, cfg.features)
    rows = np.hstack([scaled, feats])
    origins = np.arange(0, T - L - K + 1, stride)
    enc = np.stack([rows[o : o + L] for o in origins])
    dec = np.stack([feats[o + L : o + L + K - 1] for o in origins])
    target = np.stack([scaled[o + L : o + L + K] for o in origins])
    return WindowSet(enc, dec, target)


def evaluate_windows(params, windows: WindowSet, cfg: ForecastModelConfig, d: int, batch: int = 512) -> float:
    """Mean pinball loss of the model over all windows (no dropout)."""
    qs = cfg.quantile_set
    rho = np.asarray(qs.quantiles)
    total = 0.0
    count = 0
    for s in range(0, len(windows), batch):
        pred, _ = network.forward(
            params, windows.enc[s : s + batch], windows.dec[s : s + batch], d, len(qs), qs.median_index
        )
        terms = pinball_array(windows.target[s : s + batch][..., None], pred, rho)
        total += float(terms.sum())
        count += terms.size
    return total / count


def train(
    train_series: MultivariateSeries,
    validation: MultivariateSeries,
    cfg: ForecastModelConfig,
) -> TrainedForecaster:
    """Fit the neural forecaster; returns the weights of the best validation epoch."""
    if validation.metric_names != train_series.metric_names:
        raise SchemaError("train and validation series have different metrics")
    bounds = fit_bounds(train_series)
    d = train_series.n_metrics
    tr = make_windows(train_series, bounds, cfg)
    va = make_windows(validation, bounds, cfg)
    rng = np.random.default_rng(cfg.seed)
    params = network.init_params(d, cfg.features.n_features, cfg.hidden_dim, len(cfg.quantile_set), rng)
    qs = cfg.quantile_set
    stopper = EarlyStopping(cfg.early_stopping_delta, cfg.early_stopping_patience)
    best_params = {k: v.copy() for k, v in params.items()}
    report: list[EpochRecord] = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(tr))
        running = 0.0
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            loss, grads, _ = network.loss_and_grads(
                params, tr.enc[idx], tr.dec[idx], tr.target[idx], qs.quantiles, qs.median_index,
                dropout=cfg.dropout_rate, rng=rng,
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite training loss at epoch {epoch}")
            network.clip_by_global_norm(grads, cfg.clip_norm)
            for k in params:
                params[k] -= cfg.learning_rate * grads[k]
            running += loss * len(idx)
        train_loss = running / len(tr)
        val_loss = evaluate_windows(params, va, cfg, d)
        if not np.isfinite(val_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        report.append(EpochRecord(epoch, train_loss, val_loss))
        log.debug("epoch %d train %.6f val %.6f", epoch, train_loss, val_loss)
        improved = val_loss < stopper.best
        stop = stopper.update(val_loss)
        if improved:
            best_params = {k: v.copy() for k, v in params.items()}
        if stop:
            log.info("early stop after epoch %d (best epoch %d)", epoch, stopper.best_epoch)
            break
    return TrainedForecaster("neural", best_params, cfg, bounds, report)


def validation_loss(model: TrainedForecaster, series: MultivariateSeries) -> float:
    """Mean pinball loss of ``model`` over every window of ``series``."""
    if model.kind != "neural":
        raise ConfigError("validation_loss needs a neural forecaster")
    windows = make_windows(series.select(model.metric_names), model.bounds, model.config)
    return evaluate_windows(model.parameters, windows, model.config, len(model.metric_names))


# --- hyperparameter search -------------------------------------------------

TABLE_I_SPACE: dict[str, tuple] = {
    "input_window": (300, 600),
    "horizon": (300, 600),
    "hidden_dim": (25, 75),
    "batch_size": (256, 512),
    "dropout_rate": (0.05, 0.10, 0.20),
}


def expand_space(space: dict[str, Sequence], base: ForecastModelConfig) -> list[ForecastModelConfig]:
    """Cross-product of ``space`` applied on top of ``base``."""
    if not space or any(len(v) == 0 for v in space.values()):
        raise ConfigError("search space is empty")
    keys = sorted(space)
    return [base.with_(**dict(zip(keys, combo))) for combo in itertools.product(*(space[k] for k in keys))]


@dataclass(frozen=True)
class GridResult:
    best: ForecastModelConfig
    trials: list[tuple[ForecastModelConfig, float]]


def grid_search(
    train_series: MultivariateSeries,
    validation: MultivariateSeries,
    space: dict[str, Sequence] | None = None,
    base: ForecastModelConfig | None = None,
    max_epochs: int = 2,
) -> GridResult:
    """Train every configuration for ``max_epochs`` and pick the lowest
    validation loss; ties go to the smaller hidden_dim, then smaller input window."""
    base = base or ForecastModelConfig()
    candidates = expand_space(TABLE_I_SPACE if space is None else space, base)
    trials = []
    for cfg in candidates:
        model = train(train_series, validation, cfg.with_(max_epochs=min(max_epochs, cfg.max_epochs)))
        trials.append((cfg, min(r.validation_loss for r in model.training_report)))
    best = min(trials, key=lambda t: (t[1], t[0].hidden_dim, t[0].input_window))[0]
    return GridResult(best, trials)


def kfold_validate(
    data: MultivariateSeries, cfg: ForecastModelConfig, k: int, inner_validation: float = 0.2
) -> list[float]:
    """Forward-chaining K-fold: the series is cut into ``k + 1`` contiguous blocks;
    fold ``i`` trains on blocks ``0..i-1`` (its tail held out for early stopping)
    and is scored on block ``i``."""
    if k < 2:
        raise DataError(f"k-fold needs k >= 2, got {k}")
    need = cfg.input_window + cfg.horizon
    block = len(data) // (k + 1)
    first_train = int(round(block * (1 - inner_validation)))
    if block < need or first_train < need or block - first_train < need:
        raise DataError(
            f"{len(data)} rows cannot host {k} folds with input window + horizon = {need}"
        )
    losses = []
    for i in range(1, k + 1):
        prefix_end = i * block
        split = int(round(prefix_end * (1 - inner_validation)))
        tr = slice_series(data, 0, split - 1)
        va = slice_series(data, split, prefix_end - 1)
        fold = slice_series(data, prefix_end, prefix_end + block - 1)
        model = train(tr, va, cfg)
        losses.append(validation_loss(model, fold))
    return losses
