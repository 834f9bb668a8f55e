from .loss import pinball_loss, rho_risk, total_loss, window_loss
from .model import (
    EpochRecord,
    ForecastModelConfig,
    TrainedForecaster,
    fit_seasonal_naive,
    load_model,
    predict,
    save_model,
)
from .quantiles import DEFAULT_QUANTILES, QuantileForecast, QuantileSet, SampleSet, draw_samples
from .training import (
    TABLE_I_SPACE,
    EarlyStopping,
    GridResult,
    expand_space,
    grid_search,
    kfold_validate,
    make_windows,
    stopping_epoch,
    train,
    validation_loss,
)

__all__ = [
    "DEFAULT_QUANTILES", "EarlyStopping", "EpochRecord", "ForecastModelConfig", "GridResult",
    "QuantileForecast", "QuantileSet", "SampleSet", "TABLE_I_SPACE", "TrainedForecaster",
    "draw_samples", "expand_space", "fit_seasonal_naive", "grid_search", "kfold_validate",
    "load_model", "make_windows", "pinball_loss", "predict", "rho_risk", "save_model",
    "stopping_epoch", "total_loss", "train", "validation_loss", "window_loss",
]
