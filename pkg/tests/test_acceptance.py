"""Acceptance suite: one test (or small group) per numbered criterion.

The terminal summary prints one ``[PASS]``/``[FAIL]`` line per criterion.
Heavy fixtures (trained model, sweep, dual-prediction runs) are session-scoped
in ``conftest.py``.
"""

import numpy as np
import pytest
import yaml

from ampf.amdr import DualPredictorConfig, run_dual_prediction
from ampf.cli import main
from ampf.clock import SimulatedClock
from ampf.evaluation import mse, smape
from ampf.forecast import (
    QuantileForecast,
    QuantileSet,
    SampleSet,
    draw_samples,
    expand_space,
    grid_search,
    pinball_loss,
    rho_risk,
    stopping_epoch,
    total_loss,
)
from ampf.forecast.training import EarlyStopping
from ampf.monitor import AdaptiveMonitor, MonitorConfig
from ampf.series import (
    FeatureEncodingConfig,
    NormalizationBounds,
    denormalize,
    fit_bounds,
    normalize,
    scale_array,
    slice_series,
)
from ampf.sources import LiveSource, ReplaySource, SyntheticWorkloadConfig, generate_synthetic, serve_mock
from ampf.uncertainty import nu, sigma_at_step

from conftest import ACCEPTANCE_MODEL, CLI_CONFIG, make_series
from oracles import loop_mse, loop_nu, loop_rho_risk, loop_total_loss, tiny_gradient_check

criterion = pytest.mark.criterion


def non_increasing(xs):
    return all(b <= a for a, b in zip(xs, xs[1:]))


# --- 1 ------------------------------------------------------------------------

def _one_step(values):
    return SampleSet(np.asarray(values, dtype=float)[None, None, :], ("m",))


TRIVIAL_CASES = {
    "pinball identity": (lambda: pinball_loss(1, 1, 0.5), 0.0),
    "pinball under": (lambda: pinball_loss(1, 0, 0.5), 0.5),
    "pinball asym 0.9 under": (lambda: pinball_loss(2, 1, 0.9), 0.9),
    "pinball asym 0.9 over": (lambda: pinball_loss(1, 2, 0.9), 0.1),
    "sigma constant": (lambda: sigma_at_step(_one_step([1, 1, 1]), "m", 1), 0.0),
    "sigma [0, 2]": (lambda: sigma_at_step(_one_step([0, 2]), "m", 1), 1.0),
    "nu [0, 1]": (lambda: nu(SampleSet(np.array([[[1.0, 1.0]], [[0.0, 2.0]]]), ("m",)), "m"), 0.5),
    "smape identical": (lambda: smape(make_series([1.0, 2.0]), make_series([1.0, 2.0]), "m0"), 0.0),
    "smape 1 vs 3": (lambda: smape(make_series([1.0]), make_series([3.0]), "m0"), 1.0),
    "smape 0/0": (lambda: smape(make_series([0.0]), make_series([0.0]), "m0"), 0.0),
    "mse identical": (lambda: mse(make_series([4.0]), make_series([4.0]), "m0"), 0.0),
    "mse unit": (lambda: mse(make_series([0.0, 0.0]), make_series([1.0, 1.0]), "m0"), 1.0),
    "rho-risk single point": (
        lambda: rho_risk(make_series([2.0]), QuantileForecast(
            1_700_000_000, np.ones((1, 1, 1)), ("m0",), QuantileSet((0.5,))), 0.5),
        0.5,
    ),
    "normalize midpoint": (
        lambda: normalize(make_series([0.0, 5.0, 10.0]), fit_bounds(make_series([0.0, 10.0]))).values[1, 0],
        0.5,
    ),
    "denormalize degenerate": (
        lambda: denormalize(make_series([0.0]), NormalizationBounds(("m0",), (4.0,), (4.0,))).values[0, 0],
        4.0,
    ),
    "inverse-CDF midpoint": (
        lambda: float(np.median(draw_samples(QuantileForecast(
            0, np.array([[[0.0, 0.5, 1.0]]]), ("m",), QuantileSet((0.25, 0.5, 0.75))), 20001, 0).samples)),
        0.5,
    ),
}


@criterion(1, "trivial examples exact (tol 1e-9)")
@pytest.mark.parametrize("name", sorted(TRIVIAL_CASES))
def test_c1_trivial_examples(name):
    fn, expected = TRIVIAL_CASES[name]
    tol = 2e-2 if name == "inverse-CDF midpoint" else 1e-9  # sample median of a symmetric draw
    assert abs(fn() - expected) <= tol


@criterion(1, "trivial examples exact (tol 1e-9)")
def test_c1_normalization_round_trip():
    rng = np.random.default_rng(0)
    s = make_series(rng.normal(scale=50, size=(200, 3)))
    b = fit_bounds(s)
    assert np.max(np.abs(denormalize(normalize(s, b), b).values - s.values)) <= 1e-9


# --- 2 ------------------------------------------------------------------------

def _random_forecasts(rng):
    T, d, K = 10, 2, 3
    truth = make_series(rng.normal(size=(T, d)), start=500)
    qs = QuantileSet((0.25, 0.5))
    origins = rng.choice(T - K + 1, size=3, replace=False)
    fcs = [QuantileForecast(500 + int(o), rng.normal(size=(K, d, 2)), truth.metric_names, qs) for o in origins]
    return truth, fcs


@criterion(2, "oracle equivalence: total_loss, nu, rho-risk, MSE (100 cases, 1e-12)")
@pytest.mark.parametrize("quantity", ["total_loss", "nu", "rho_risk", "mse"])
def test_c2_oracle_equivalence(quantity):
    for case in range(100):
        rng = np.random.default_rng([2, case])
        if quantity == "total_loss":
            truth, fcs = _random_forecasts(rng)
            got, want = total_loss(truth, fcs), loop_total_loss(truth, fcs)
        elif quantity == "rho_risk":
            truth, fcs = _random_forecasts(rng)
            got, want = rho_risk(truth, fcs, 0.25), loop_rho_risk(truth, fcs, 0.25)
        elif quantity == "nu":
            x = rng.normal(size=(5, 2, 7))
            got, want = nu(SampleSet(x, ("a", "b")), "b"), loop_nu(x, 1)
        else:
            a, b = rng.normal(size=(25, 1)), rng.normal(size=(25, 1))
            got, want = mse(make_series(a), make_series(b), "m0"), loop_mse(a[:, 0], b[:, 0])
        assert abs(got - want) <= 1e-12, (case, got, want)


# --- 3 ------------------------------------------------------------------------

@criterion(3, "gradient check vs central differences (rel err < 1e-3)")
def test_c3_gradient_check():
    errors = tiny_gradient_check(hidden=4, L=8, K=4)
    print("relative errors:", errors)
    assert max(errors.values()) < 1e-3


# --- 4 ------------------------------------------------------------------------

@criterion(4, "calibration: [q0.05, q0.95] held-out coverage in [0.80, 0.99]")
def test_c4_calibration(acceptance_model, acceptance_splits):
    _, _, test = acceptance_splits
    L, K = ACCEPTANCE_MODEL.input_window, ACCEPTANCE_MODEL.horizon
    scaled = scale_array(test.values, acceptance_model.bounds)
    qs = acceptance_model.config.quantile_set
    lo, hi = qs.index(0.05), qs.index(0.95)
    inside = []
    for o in range(0, len(test) - L - K + 1, K):
        fc = acceptance_model.predict(slice_series(test, o, o + L - 1))
        y = scaled[o + L : o + L + K]
        inside.append((y >= fc.values[:, :, lo]) & (y <= fc.values[:, :, hi]))
    coverage = float(np.mean(inside))
    print(f"coverage {coverage:.4f}; per metric {np.mean(inside, axis=(0, 1)).round(3).tolist()}")
    assert 0.80 <= coverage <= 0.99


# --- 5 ------------------------------------------------------------------------

@criterion(5, "threshold extremes: 0 -> 100%, +inf -> 0% after bootstrap")
@pytest.mark.parametrize("threshold,expected", [(0.0, 1.0), (float(np.finfo(float).max), 0.0)])
def test_c5_threshold_extremes(acceptance_model, acceptance_splits, threshold, expected):
    _, _, test = acceptance_splits
    clock = SimulatedClock(test.start_timestamp)
    cfg = MonitorConfig(ACCEPTANCE_MODEL.input_window, ACCEPTANCE_MODEL.horizon, threshold, seed=0)
    mon = AdaptiveMonitor(acceptance_model, ReplaySource(test, clock), cfg, clock)
    state = mon.run(40)
    for m in test.metric_names:
        assert state.ledger.transmitted_fraction(m, after_bootstrap=True) == expected
    if expected == 1.0:
        rec = mon.reconstruct()
        assert np.array_equal(rec.values, slice_series(test, 0, len(rec) - 1).values)
        assert all(min(d.nu.values()) > 0 for d in state.ledger.decisions)


# --- 6 ------------------------------------------------------------------------

@criterion(6, "transmitted fraction non-increasing in threshold (ampf frozen; amdr exact)")
def test_c6_monotone_ampf(acceptance_sweep):
    for m in acceptance_sweep.metrics:
        th, frac = acceptance_sweep.series("ampf", m, "transmitted_fraction")
        assert len(th) == 19
        assert non_increasing(frac), (m, frac)


@criterion(6, "transmitted fraction non-increasing in threshold (ampf frozen; amdr exact)")
def test_c6_monotone_amdr(acceptance_sweep):
    violations = {}
    for m in acceptance_sweep.metrics:
        th, frac = acceptance_sweep.series("amdr", m, "transmitted_fraction")
        assert len(th) == 19
        bad = [(th[i], frac[i], frac[i + 1]) for i in range(len(frac) - 1) if frac[i + 1] > frac[i]]
        if bad:
            violations[m] = bad
    assert not violations, f"increases in transmitted fraction: {violations}"


# --- 7 ------------------------------------------------------------------------

@criterion(7, "ordering: transmitted(0.0225) > transmitted(0.0475), MSE(0.0475) >= MSE(0.0225)")
def test_c7_ordering(acceptance_sweep):
    rows = {(r.method, r.threshold, r.metric): r for r in acceptance_sweep.rows}
    for m in acceptance_sweep.metrics:
        lo, hi = rows[("ampf", 0.0225, m)], rows[("ampf", 0.0475, m)]
        assert lo.transmitted_fraction > hi.transmitted_fraction, m
        assert hi.mse >= lo.mse, m


# --- 8 ------------------------------------------------------------------------

@criterion(8, "AM-DR hard bound at every suppressed point; e_max = 0 -> 100%")
def test_c8_amdr_bound(acceptance_dual_runs):
    scaled, runs = acceptance_dual_runs
    assert len(runs) == 19
    for res in runs:
        err = np.abs(res.reconstruction.values - scaled.values)
        assert np.all(err[~res.transmitted_mask] <= res.e_max)
        assert np.array_equal(res.reconstruction.values[res.transmitted_mask], scaled.values[res.transmitted_mask])


@criterion(8, "AM-DR hard bound at every suppressed point; e_max = 0 -> 100%")
def test_c8_amdr_lossless(acceptance_dual_runs):
    scaled, _ = acceptance_dual_runs
    res = run_dual_prediction(scaled, DualPredictorConfig(e_max=0.0))
    assert res.transmitted_mask.all()
    assert res.reconstruction == scaled


# --- 9 ------------------------------------------------------------------------

@criterion(9, "SMAPE non-decreasing (<= 1 inversion of size <= 0.01) for both methods")
@pytest.mark.parametrize("method", ["ampf", "amdr"])
def test_c9_smape_trend(acceptance_sweep, method):
    for m in acceptance_sweep.metrics:
        _, s = acceptance_sweep.series(method, m, "smape")
        drops = [s[i] - s[i + 1] for i in range(len(s) - 1) if s[i + 1] < s[i]]
        assert len(drops) <= 1 and all(d <= 0.01 for d in drops), (m, drops)


# --- 10 -----------------------------------------------------------------------

MINI_SPACE = {
    "input_window": (8, 12),
    "horizon": (4, 6),
    "hidden_dim": (3, 5),
    "batch_size": (16, 32),
    "dropout_rate": (0.05, 0.10, 0.20),
}


@criterion(10, "hyperopt: 48 configs, argmin with tie-breaks, deterministic")
def test_c10_hyperopt():
    data = generate_synthetic(SyntheticWorkloadConfig(duration=600, rate_periods=(100.0, 300.0)))
    tr, va = slice_series(data, 0, 399), slice_series(data, 400, 599)
    base = ACCEPTANCE_MODEL.with_(learning_rate=0.5, window_stride=2, features=FeatureEncodingConfig.none())
    assert len(expand_space(MINI_SPACE, base)) == 48
    a = grid_search(tr, va, MINI_SPACE, base, max_epochs=1)
    b = grid_search(tr, va, MINI_SPACE, base, max_epochs=1)
    assert len(a.trials) == 48
    assert len({(c.input_window, c.horizon, c.hidden_dim, c.batch_size, c.dropout_rate) for c, _ in a.trials}) == 48
    best_key = min((loss, c.hidden_dim, c.input_window) for c, loss in a.trials)
    assert (min(v for _, v in a.trials), a.best.hidden_dim, a.best.input_window) == best_key
    assert a.best == b.best and a.trials == b.trials


# --- 11 -----------------------------------------------------------------------

@criterion(11, "early stopping per the > 0.001 within 5 epochs rule")
def test_c11_early_stopping():
    trace = [1.0, 0.9995, 0.999, 0.9992, 0.9991, 0.999]
    es = EarlyStopping(0.001, 5)
    stop_at = next(i + 1 for i, x in enumerate(trace) if es.update(x))
    assert es.best == 0.999 and es.best_epoch == 3
    assert stop_at <= 8
    assert stopping_epoch(trace + [0.5]) == stop_at  # later values are never consulted
    assert stopping_epoch([1.0, 0.9] + [0.8995] * 5) == 7
    assert stopping_epoch([1.0, 0.9] + [0.8995] * 4 + [0.85]) is None
    assert stopping_epoch([1.0 - 0.002 * i for i in range(30)]) is None


# --- 12 -----------------------------------------------------------------------

@criterion(12, "end-to-end mock endpoint + scrape + monitor over 5000 steps")
def test_c12_end_to_end(acceptance_model, acceptance_data):
    series = slice_series(acceptance_data, 12000, 16999)
    L, K = ACCEPTANCE_MODEL.input_window, ACCEPTANCE_MODEL.horizon
    clock = SimulatedClock(series.start_timestamp)
    horizons = (len(series) - L) // K
    with serve_mock(series, clock) as ep:
        source = LiveSource(ep.url, series.metric_names, start_timestamp=series.start_timestamp, clock=clock)
        cfg = MonitorConfig(L, K, threshold=0.03, seed=0)
        mon = AdaptiveMonitor(acceptance_model, source, cfg, clock)
        state = mon.run(horizons)
        live_row = source.scrape()
    elapsed = L + horizons * K
    assert elapsed >= len(series) - K
    led = state.ledger
    for m in series.metric_names:
        assert led.fetched[m] + led.substituted[m] == elapsed
        assert led.degraded[m] == 0
    rec = mon.reconstruct()
    mask = state.fetched_mask()
    truth = slice_series(series, 0, elapsed - 1).values
    assert np.array_equal(rec.values[mask], truth[mask])
    assert 0 < mask[L:].mean() < 1  # the threshold produced a genuine mix
    idx = series.index_of(live_row.start_timestamp)
    assert np.array_equal(live_row.values[0], series.values[idx])


# --- 13 -----------------------------------------------------------------------

@criterion(13, "every CLI command byte-identical on rerun")
def test_c13_cli_determinism(tmp_path):
    config = tmp_path / "cfg.yaml"
    config.write_text(yaml.safe_dump(CLI_CONFIG))
    cfg = str(config)

    def run_all(root):
        model = str(root / "model" / "model.npz")
        commands = [
            ["generate", "--out", str(root / "generate" / "data.csv")],
            ["train", "--out", str(root / "model")],
            ["hyperopt", "--out", str(root / "hyperopt")],
            ["run", "--model", model, "--out", str(root / "run")],
            ["baseline", "--out", str(root / "baseline")],
            ["sweep", "--model", model, "--out", str(root / "sweep")],
            ["report", "--sweep", str(root / "sweep" / "sweep.csv"), "--out", str(root / "report")],
        ]
        for argv in commands:
            assert main([argv[0], "--config", cfg, *argv[1:]]) == 0, argv
        return {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file()
        }

    a, b = run_all(tmp_path / "a"), run_all(tmp_path / "b")
    csvs = [k for k in a if k.endswith(".csv")]
    assert len(csvs) >= 10
    assert a.keys() == b.keys()
    for k in a:
        assert a[k] == b[k], k
