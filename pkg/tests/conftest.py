import numpy as np
import pytest

from ampf.amdr import DualPredictorConfig, sweep_dual
from ampf.evaluation import SweepConfig, default_thresholds, run_sweep, split_series
from ampf.forecast import ForecastModelConfig, train
from ampf.series import FeatureEncodingConfig, MultivariateSeries, fit_bounds, normalize
from ampf.sources import SyntheticWorkloadConfig, generate_synthetic

# Desk-scale acceptance setup: 20k one-second steps, periods compressed so
# several cycles fit into the data, small window/horizon so training is quick.
ACCEPTANCE_DATA = SyntheticWorkloadConfig(seed=0, duration=20000, rate_periods=(3600.0, 14400.0))
ACCEPTANCE_MODEL = ForecastModelConfig(
    input_window=48,
    horizon=24,
    hidden_dim=16,
    batch_size=16,
    dropout_rate=0.05,
    learning_rate=1.0,
    max_epochs=30,
    features=FeatureEncodingConfig.none(),
    window_stride=4,
    seed=0,
)


# Small end-to-end configuration for exercising the command line quickly.
CLI_CONFIG = {
    "seed": 3,
    "data": {"synthetic": {"duration": 1500, "rate_periods": [300.0, 1200.0]}},
    "model": {
        "input_window": 16,
        "horizon": 8,
        "hidden_dim": 4,
        "batch_size": 16,
        "learning_rate": 0.5,
        "max_epochs": 2,
        "window_stride": 4,
        "features": {
            "enable_second_of_minute_cyclical": False,
            "enable_month_of_year_cyclical": False,
            "enable_minute_of_day": False,
            "enable_workday_weekend": False,
        },
    },
    "monitor": {"threshold": 0.03, "n_samples": 20},
    "sweep": {
        "thresholds": [0.01, 0.03, 0.05],
        "n_samples": 20,
        "hyperopt_space": {"hidden_dim": [3, 4], "dropout_rate": [0.0, 0.1]},
        "hyperopt_epochs": 1,
    },
    "amdr": {"e_max": 0.02},
}


def make_series(values, start=1_700_000_000, names=None, step=1):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    names = names or [f"m{i}" for i in range(values.shape[1])]
    return MultivariateSeries(start, values, tuple(names), step)


@pytest.fixture(scope="session")
def acceptance_data():
    return generate_synthetic(ACCEPTANCE_DATA)


@pytest.fixture(scope="session")
def acceptance_splits(acceptance_data):
    return split_series(acceptance_data, (0.6, 0.2, 0.2))


@pytest.fixture(scope="session")
def acceptance_model(acceptance_splits):
    tr, va, _ = acceptance_splits
    return train(tr, va, ACCEPTANCE_MODEL)


@pytest.fixture(scope="session")
def acceptance_sweep_config():
    return SweepConfig(synthetic=ACCEPTANCE_DATA, model=ACCEPTANCE_MODEL, seed=0)


@pytest.fixture(scope="session")
def acceptance_sweep(acceptance_sweep_config, acceptance_model):
    return run_sweep(acceptance_sweep_config, model=acceptance_model)


@pytest.fixture(scope="session")
def acceptance_dual_runs(acceptance_splits):
    tr, _, te = acceptance_splits
    scaled = normalize(te, fit_bounds(tr))
    return scaled, sweep_dual(scaled, default_thresholds(), DualPredictorConfig())


# --- per-criterion reporting ----------------------------------------------

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number and summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, text = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        prev = _criteria.get(n, (text, "PASS"))[1]
        _criteria[n] = (text, "FAIL" if failed or prev == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        text, status = _criteria[n]
        terminalreporter.write_line(f"[{status}] criterion {n:2d}: {text}")
