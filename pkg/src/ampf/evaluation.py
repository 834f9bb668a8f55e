"""Threshold sweeps over both methods, reconstruction error metrics and reports."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .amdr import DualPredictorConfig, run_dual_prediction
from .clock import SimulatedClock
from .errors import ConfigError, DataError, SchemaError, ShapeError
from .forecast.model import ForecastModelConfig, TrainedForecaster, fit_seasonal_naive
from .forecast.quantiles import QuantileForecast
from .forecast.training import grid_search, train
from .monitor import AdaptiveMonitor, MonitorConfig
from .series import (
    MultivariateSeries,
    denormalize,
    fit_bounds,
    format_float,
    normalize,
    parse_csv,
    slice_series,
)
from .sources.base import ReplaySource
from .sources.synthetic import SyntheticWorkloadConfig, generate_synthetic

log = logging.getLogger(__name__)


def default_thresholds() -> list[float]:
    """0.005 to 0.05 in steps of 0.0025 (19 values)."""
    return [round(0.005 + 0.0025 * i, 6) for i in range(19)]


def _aligned_columns(truth: MultivariateSeries, recon: MultivariateSeries, metric: str):
    if len(truth) != len(recon) or truth.start_timestamp != recon.start_timestamp or truth.step != recon.step:
        raise ShapeError("truth and reconstruction are not aligned")
    return truth.column(metric), recon.column(metric)


def smape(truth: MultivariateSeries, recon: MultivariateSeries, metric: str) -> float:
    """Mean of 2|r - y| / (|y| + |r|) with 0/0 terms counted as 0; in [0, 2]."""
    y, r = _aligned_columns(truth, recon, metric)
    num = 2.0 * np.abs(r - y)
    den = np.abs(y) + np.abs(r)
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(terms.mean())


def mse(truth: MultivariateSeries, recon: MultivariateSeries, metric: str) -> float:
    y, r = _aligned_columns(truth, recon, metric)
    return float(np.mean((r - y) ** 2))


# --- configuration -----------------------------------------------------------

@dataclass
class SweepConfig:
    thresholds: list[float] = field(default_factory=default_thresholds)
    methods: tuple[str, ...] = ("ampf", "amdr")
    synthetic: SyntheticWorkloadConfig | None = field(default_factory=SyntheticWorkloadConfig)
    csv_path: str | None = None
    splits: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0
    model: ForecastModelConfig = field(default_factory=ForecastModelConfig)
    model_kind: str = "neural"
    naive_period: int | None = None
    hyperopt: bool = False
    hyperopt_space: dict | None = None
    hyperopt_epochs: int = 2
    n_samples: int = 100
    amdr: DualPredictorConfig = field(default_factory=DualPredictorConfig)

    def __post_init__(self) -> None:
        self.thresholds = [float(t) for t in self.thresholds]
        if not self.thresholds:
            raise ConfigError("no thresholds")
        if any(t <= 0 for t in self.thresholds) or self.thresholds != sorted(self.thresholds):
            raise ConfigError("thresholds must be positive and sorted")
        self.methods = tuple(self.methods)
        bad = set(self.methods) - {"ampf", "amdr"}
        if bad or not self.methods:
            raise ConfigError(f"methods must be a non-empty subset of ampf, amdr; got {self.methods}")
        if len(self.splits) != 3 or any(s <= 0 for s in self.splits) or abs(sum(self.splits) - 1) > 1e-9:
            raise ConfigError(f"splits must be three positive fractions summing to 1, got {self.splits}")
        if self.model_kind not in ("neural", "seasonal_naive"):
            raise ConfigError(f"unknown model kind {self.model_kind!r}")
        if self.csv_path is None and self.synthetic is None:
            raise ConfigError("need either a synthetic dataset config or a CSV path")


def load_dataset(cfg: SweepConfig) -> MultivariateSeries:
    if cfg.csv_path is not None:
        return parse_csv(Path(cfg.csv_path).read_text())
    return generate_synthetic(cfg.synthetic)


def split_series(data: MultivariateSeries, splits: Sequence[float]):
    """Contiguous train/validation/test blocks in that order."""
    T = len(data)
    a = int(round(T * splits[0]))
    b = int(round(T * (splits[0] + splits[1])))
    if a < 1 or b <= a or b >= T:
        raise DataError(f"series of length {T} too short for splits {tuple(splits)}")
    return slice_series(data, 0, a - 1), slice_series(data, a, b - 1), slice_series(data, b, T - 1)


# --- results -----------------------------------------------------------------

SWEEP_HEADER = ["method", "threshold", "metric", "transmitted_fraction", "smape", "mse"]


@dataclass(frozen=True)
class SweepRow:
    method: str
    threshold: float
    metric: str
    transmitted_fraction: float
    smape: float
    mse: float


@dataclass
class SweepResult:
    rows: list[SweepRow]

    def __post_init__(self) -> None:
        self.rows = sorted(self.rows, key=lambda r: (r.method, r.threshold, r.metric))

    def series(self, method: str, metric: str, attr: str) -> tuple[list[float], list[float]]:
        pts = [(r.threshold, getattr(r, attr)) for r in self.rows if r.method == method and r.metric == metric]
        return [p[0] for p in pts], [p[1] for p in pts]

    @property
    def methods(self) -> list[str]:
        return sorted({r.method for r in self.rows})

    @property
    def metrics(self) -> list[str]:
        return sorted({r.metric for r in self.rows})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in self.rows:
            w.writerow([r.method, format_float(r.threshold), r.metric, format_float(r.transmitted_fraction),
                        format_float(r.smape), format_float(r.mse)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> SweepResult:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != SWEEP_HEADER:
            raise SchemaError(f"sweep CSV header must be {','.join(SWEEP_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise SchemaError(f"line {lineno}: expected 6 fields")
            rows.append(SweepRow(row[0], float(row[1]), row[2], float(row[3]), float(row[4]), float(row[5])))
        return cls(rows)


# --- sweep -------------------------------------------------------------------

class _MemoForecaster:
    """Caches forecasts by input window; with oracle inputs every threshold
    asks for the same windows."""

    def __init__(self, model: TrainedForecaster):
        self._model = model
        self._cache: dict[tuple[int, bytes], QuantileForecast] = {}

    def __getattr__(self, name):
        return getattr(self._model, name)

    def predict(self, inputs: MultivariateSeries) -> QuantileForecast:
        key = (inputs.start_timestamp, inputs.values.tobytes())
        if key not in self._cache:
            self._cache[key] = self._model.predict(inputs)
        return self._cache[key]


def fit_forecaster(cfg: SweepConfig, train_split: MultivariateSeries, val_split: MultivariateSeries) -> TrainedForecaster:
    if cfg.model_kind == "seasonal_naive":
        return fit_seasonal_naive(train_split, cfg.model, cfg.naive_period)
    model_cfg = cfg.model
    if cfg.hyperopt:
        model_cfg = grid_search(train_split, val_split, cfg.hyperopt_space, cfg.model, cfg.hyperopt_epochs).best
    return train(train_split, val_split, model_cfg)


def run_ampf(model: TrainedForecaster, test: MultivariateSeries, threshold: float, n_samples: int, seed: int):
    """Frozen-model monitor run over ``test``; returns (truth, recon, ledger)."""
    L, K = model.config.input_window, model.config.horizon
    n_horizons = (len(test) - L) // K
    if n_horizons < 1:
        raise DataError(f"test split of {len(test)} rows cannot hold input window {L} plus one horizon {K}")
    clock = SimulatedClock(test.start_timestamp)
    mcfg = MonitorConfig(L, K, threshold, n_samples=n_samples, seed=seed, input_mode="oracle")
    mon = AdaptiveMonitor(model, ReplaySource(test, clock), mcfg, clock, reference=test)
    state = mon.run(n_horizons)
    recon = mon.reconstruct()
    truth = slice_series(test, 0, len(recon) - 1)
    return truth, recon, state.ledger


def run_sweep(cfg: SweepConfig, model: TrainedForecaster | None = None) -> SweepResult:
    data = load_dataset(cfg)
    train_split, val_split, test = split_series(data, cfg.splits)
    rows: list[SweepRow] = []
    if "ampf" in cfg.methods:
        if model is None:
            model = fit_forecaster(cfg, train_split, val_split)
        frozen = _MemoForecaster(model)
        for tau in cfg.thresholds:
            truth, recon, ledger = run_ampf(frozen, test, tau, cfg.n_samples, cfg.seed)
            for m in data.metric_names:
                rows.append(SweepRow("ampf", tau, m, ledger.transmitted_fraction(m),
                                     smape(truth, recon, m), mse(truth, recon, m)))
    if "amdr" in cfg.methods:
        bounds = fit_bounds(train_split)
        scaled = normalize(test, bounds)
        for tau in cfg.thresholds:
            res = run_dual_prediction(scaled, DualPredictorConfig(cfg.amdr.filter_order, cfg.amdr.step_size, tau, cfg.amdr.eps))
            recon = denormalize(res.reconstruction, bounds)
            frac = res.transmitted_fraction
            for m in data.metric_names:
                rows.append(SweepRow("amdr", tau, m, frac[m], smape(test, recon, m), mse(test, recon, m)))
    return SweepResult(rows)


# --- reporting ---------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def line_chart_svg(result: SweepResult, attr: str, title: str, ylabel: str) -> str:
    """Self-contained SVG line chart of ``attr`` vs threshold per (method, metric).

    The plotted numbers are embedded as CSV inside ``<metadata>``.
    """
    W, H, ml, mr, mt, mb = 720, 420, 70, 170, 40, 50
    pw, ph = W - ml - mr, H - mt - mb
    xs = sorted({r.threshold for r in result.rows})
    x0, x1 = xs[0], xs[-1]
    ys = [getattr(r, attr) for r in result.rows]
    y0, y1 = 0.0, max(max(ys), 1e-12) * 1.05

    def px(x):
        return ml + (pw * (x - x0) / (x1 - x0) if x1 > x0 else pw / 2)

    def py(y):
        return mt + ph - ph * (y - y0) / (y1 - y0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f"<title>{escape(title)}</title>",
        "<metadata><![CDATA[",
        "method,threshold,metric," + attr,
        *[f"{r.method},{format_float(r.threshold)},{r.metric},{format_float(getattr(r, attr))}" for r in result.rows],
        "]]></metadata>",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
    ]
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{_fmt(px(xv))}" y="{mt + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{xv:.4f}</text>')
        out.append(f'<text x="{ml - 6}" y="{_fmt(py(yv) + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{yv:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{H - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">threshold</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" transform="rotate(-90 16 {mt + ph / 2:.1f})" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(ylabel)}</text>')
    legend_y = mt
    for mi, method in enumerate(result.methods):
        dash = "" if mi == 0 else ' stroke-dasharray="6 3"'
        for ci, metric in enumerate(result.metrics):
            tx, ty = result.series(method, metric, attr)
            if not tx:
                continue
            color = _PALETTE[ci % len(_PALETTE)]
            pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(tx, ty))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{pts}"/>')
            out.append(f'<line x1="{ml + pw + 12}" y1="{legend_y}" x2="{ml + pw + 36}" y2="{legend_y}" stroke="{color}" stroke-width="2"{dash}/>')
            out.append(f'<text x="{ml + pw + 42}" y="{legend_y + 4}" font-family="sans-serif" font-size="11">{escape(method)}: {escape(metric)}</text>')
            legend_y += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(result: SweepResult, out_dir: str | Path) -> list[Path]:
    """Write ``sweep.csv``, ``transmitted.svg`` and ``smape.svg`` into ``out_dir``."""
    if not result.rows:
        raise DataError("empty sweep result")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "sweep.csv": result.to_csv(),
        "transmitted.svg": line_chart_svg(result, "transmitted_fraction", "Transmitted data vs threshold", "transmitted fraction"),
        "smape.svg": line_chart_svg(result, "smape", "Reconstruction SMAPE vs threshold", "SMAPE"),
    }
    paths = []
    for name, text in files.items():
        p = out / name
        p.write_text(text)
        paths.append(p)
    return paths
