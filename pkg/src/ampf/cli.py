"""Command-line entry point: ``ampf <command> [--config FILE] [flags]``.

Every flag overrides the corresponding key of the YAML config file.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime/fetch error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any

import yaml

from . import __version__
from .amdr import DualPredictorConfig, dual_ledger_csv, run_dual_prediction
from .clock import SimulatedClock, WallClock
from .errors import AmpfError, ConfigError, DataError
from .evaluation import SweepConfig, SweepResult, emit_report, fit_forecaster, run_sweep, split_series
from .forecast.model import ForecastModelConfig, load_model
from .forecast.training import TABLE_I_SPACE, grid_search
from .monitor import AdaptiveMonitor, MonitorConfig
from .series import denormalize, fit_bounds, format_float, normalize, parse_csv, series_to_csv
from .sources.base import ReplaySource
from .sources.live import LiveSource
from .sources.synthetic import SyntheticWorkloadConfig, generate_synthetic

log = logging.getLogger("ampf")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4


# --- configuration ---------------------------------------------------------

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    return cfg


def set_key(cfg: dict, dotted: str, value: Any) -> None:
    node = cfg
    *parents, leaf = dotted.split(".")
    for p in parents:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"config key {p!r} is not a mapping")
    node[leaf] = value


def get_key(cfg: dict, dotted: str, default: Any = None) -> Any:
    node: Any = cfg
    for p in dotted.split("."):
        if not isinstance(node, dict) or p not in node:
            return default
        node = node[p]
    return node


def _section(cfg: dict, key: str) -> dict:
    sec = cfg.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {key!r} must be a mapping")
    return sec


def _build(factory, section: dict, what: str):
    try:
        return factory(**section)
    except TypeError as exc:
        raise ConfigError(f"bad {what} config: {exc}") from exc


def synthetic_config(cfg: dict) -> SyntheticWorkloadConfig:
    sec = dict(_section(_section(cfg, "data"), "synthetic"))
    sec.setdefault("seed", cfg.get("seed", 0))
    return _build(SyntheticWorkloadConfig, sec, "data.synthetic")


def model_config(cfg: dict) -> ForecastModelConfig:
    sec = dict(_section(cfg, "model"))
    sec.setdefault("seed", cfg.get("seed", 0))
    try:
        return ForecastModelConfig.from_dict(sec)
    except TypeError as exc:
        raise ConfigError(f"bad model config: {exc}") from exc


def amdr_config(cfg: dict) -> DualPredictorConfig:
    return _build(DualPredictorConfig, dict(_section(cfg, "amdr")), "amdr")


def sweep_config(cfg: dict) -> SweepConfig:
    sec = dict(_section(cfg, "sweep"))
    csv_path = get_key(cfg, "data.csv")
    space = sec.pop("hyperopt_space", None)
    return _build(
        SweepConfig,
        dict(
            sec,
            synthetic=None if csv_path else synthetic_config(cfg),
            csv_path=csv_path,
            seed=cfg.get("seed", 0),
            model=model_config(cfg),
            model_kind=cfg.get("model_kind", "neural"),
            naive_period=cfg.get("naive_period"),
            amdr=amdr_config(cfg),
            hyperopt_space={k: tuple(v) for k, v in space.items()} if space else None,
        ),
        "sweep",
    )


def load_series(cfg: dict):
    path = get_key(cfg, "data.csv")
    if path:
        try:
            return parse_csv(Path(path).read_text())
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
    return generate_synthetic(synthetic_config(cfg))


def _out_dir(cfg: dict, default: str) -> Path:
    out = Path(cfg.get("out", default))
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands ----------------------------------------------------------------

def cmd_generate(cfg: dict) -> None:
    scfg = synthetic_config(cfg)
    series = generate_synthetic(scfg)
    out = Path(cfg.get("out", "synthetic.csv"))
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(series_to_csv(series))
    out.with_suffix(".meta.json").write_text(json.dumps(scfg.metadata(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(series)} rows to {out}")


def _train_val(cfg: dict):
    sc = sweep_config(cfg)
    tr, va, _ = split_series(load_series(cfg), sc.splits)
    return sc, tr, va


def cmd_train(cfg: dict) -> None:
    sc, tr, va = _train_val(cfg)
    model = fit_forecaster(sc, tr, va)
    out = _out_dir(cfg, "model")
    model.save(out / "model.npz")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "validation_loss"])
    for r in model.training_report:
        w.writerow([r.epoch, format_float(r.train_loss), format_float(r.validation_loss)])
    (out / "training_report.csv").write_text(buf.getvalue())
    print(f"saved {model.kind} model to {out / 'model.npz'}")


def cmd_hyperopt(cfg: dict) -> None:
    sc, tr, va = _train_val(cfg)
    space = sc.hyperopt_space or TABLE_I_SPACE
    result = grid_search(tr, va, space, sc.model, sc.hyperopt_epochs)
    out = _out_dir(cfg, "hyperopt")
    keys = sorted(space)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*keys, "validation_loss"])
    for trial_cfg, loss in result.trials:
        w.writerow([*(getattr(trial_cfg, k) for k in keys), format_float(loss)])
    (out / "hyperopt.csv").write_text(buf.getvalue())
    best = {k: getattr(result.best, k) for k in keys}
    (out / "best_config.yaml").write_text(yaml.safe_dump({"model": best}, sort_keys=True))
    print(f"evaluated {len(result.trials)} configurations; best {best}")


def cmd_run(cfg: dict) -> None:
    model_path = cfg.get("model_path")
    if not model_path:
        raise ConfigError("run needs --model")
    model = load_model(model_path)
    mon = _section(cfg, "monitor")
    mcfg = _build(
        MonitorConfig,
        dict(
            {k: v for k, v in mon.items() if k not in ("horizons", "auto_retrain")},
            input_window=model.config.input_window,
            horizon=model.config.horizon,
            threshold=float(mon.get("threshold", 0.025)),
            seed=cfg.get("seed", 0),
        ),
        "monitor",
    )
    endpoint = cfg.get("endpoint")
    if endpoint:
        clock = WallClock()
        source = LiveSource(endpoint, model.metric_names, clock=clock)
    else:
        series = load_series(cfg)
        clock = SimulatedClock(series.start_timestamp)
        source = ReplaySource(series, clock)
    horizons = mon.get("horizons")
    if horizons is None:
        if endpoint:
            raise ConfigError("live runs need monitor.horizons")
        horizons = (len(series) - mcfg.input_window) // mcfg.horizon
    runner = AdaptiveMonitor(model, source, mcfg, clock, auto_retrain=bool(mon.get("auto_retrain", False)))
    state = runner.run(int(horizons))
    out = _out_dir(cfg, "run")
    (out / "ledger.csv").write_text(state.ledger.to_csv())
    (out / "decisions.csv").write_text(state.ledger.decisions_csv())
    (out / "reconstruction.csv").write_text(series_to_csv(runner.reconstruct()))
    print(f"ran {state.horizons} horizons; retrained {runner.retrain_count} times; outputs in {out}")


def cmd_baseline(cfg: dict) -> None:
    series = load_series(cfg)
    sc = sweep_config(cfg)
    tr, _, _ = split_series(series, sc.splits)
    bounds = fit_bounds(tr)
    acfg = amdr_config(cfg)
    res = run_dual_prediction(normalize(series, bounds), acfg)
    out = _out_dir(cfg, "baseline")
    (out / "ledger.csv").write_text(dual_ledger_csv(res))
    (out / "reconstruction.csv").write_text(series_to_csv(denormalize(res.reconstruction, bounds)))
    print(f"e_max={acfg.e_max}: transmitted {res.transmitted_fraction}")


def cmd_sweep(cfg: dict) -> None:
    sc = sweep_config(cfg)
    model = load_model(cfg["model_path"]) if cfg.get("model_path") else None
    result = run_sweep(sc, model)
    out = _out_dir(cfg, "sweep")
    (out / "sweep.csv").write_text(result.to_csv())
    print(f"{len(result.rows)} rows written to {out / 'sweep.csv'}")


def cmd_report(cfg: dict) -> None:
    path = cfg.get("sweep_csv")
    if not path:
        raise ConfigError("report needs --sweep")
    try:
        result = SweepResult.from_csv(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    paths = emit_report(result, _out_dir(cfg, "report"))
    print("wrote " + ", ".join(str(p) for p in paths))


COMMANDS = {
    "generate": (cmd_generate, "generate a synthetic dataset as CSV"),
    "train": (cmd_train, "train and save a forecaster"),
    "hyperopt": (cmd_hyperopt, "grid-search forecaster hyperparameters"),
    "run": (cmd_run, "run the adaptive monitor against a CSV replay or live endpoint"),
    "baseline": (cmd_baseline, "single dual-prediction baseline run"),
    "sweep": (cmd_sweep, "threshold sweep for both methods"),
    "report": (cmd_report, "CSV and SVG charts from a sweep result"),
}

# flag -> (config key, type)
FLAGS = {
    "seed": ("seed", int),
    "out": ("out", str),
    "data": ("data.csv", str),
    "duration": ("data.synthetic.duration", int),
    "model": ("model_path", str),
    "endpoint": ("endpoint", str),
    "threshold": ("monitor.threshold", float),
    "horizons": ("monitor.horizons", int),
    "n_samples": ("monitor.n_samples", int),
    "e_max": ("amdr.e_max", float),
    "epochs": ("model.max_epochs", int),
    "sweep": ("sweep_csv", str),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ampf", description="Adaptive monitoring with probabilistic forecasts")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (dotted path, YAML value)")
        p.add_argument("-v", "--verbose", action="store_true")
        for flag, (key, typ) in FLAGS.items():
            p.add_argument("--" + flag.replace("_", "-"), dest=flag, type=typ, help=f"overrides '{key}'")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = load_config(args.config)
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        set_key(cfg, key.strip(), yaml.safe_load(raw))
    for flag, (key, _) in FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            set_key(cfg, key, value)
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command][0](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AmpfError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
