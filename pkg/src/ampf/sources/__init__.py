from pathlib import Path

from ..series import MultivariateSeries, parse_csv
from .base import MetricSource, ReplaySource
from .exposition import parse_exposition, render_exposition, scrape
from .live import LiveSource
from .mock import MockEndpoint, serve_mock
from .synthetic import METRICS, SyntheticWorkloadConfig, generate_synthetic


def load_csv(path: str | Path) -> MultivariateSeries:
    """Read a ``timestamp,<metric>...`` file into a series."""
    return parse_csv(Path(path).read_text())


__all__ = [
    "LiveSource", "METRICS", "MetricSource", "MockEndpoint", "ReplaySource",
    "SyntheticWorkloadConfig", "generate_synthetic", "load_csv", "parse_exposition",
    "render_exposition", "scrape", "serve_mock",
]
