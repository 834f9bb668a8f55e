"""Text exposition format: ``name[{labels}] value [timestamp]`` per line."""

from __future__ import annotations

import logging
import math
import re
import urllib.error
import urllib.request
from typing import Sequence

import numpy as np

from ..clock import Clock, WallClock
from ..errors import FetchError, MissingMetricError
from ..series import MultivariateSeries, format_float

log = logging.getLogger(__name__)

_LINE = re.compile(
    r"^(?P<name>[a-zA-Z_:][a-zA-Z0-9_:]*)"
    r"(?:\{(?P<labels>[^}]*)\})?"
    r"\s+(?P<value>\S+)"
    r"(?:\s+(?P<ts>-?\d+))?\s*$"
)


def parse_exposition(text: str) -> tuple[dict[str, float], int]:
    """Return ``({name: value}, skipped_line_count)``.

    Labels are ignored; when a name repeats, the first occurrence wins.
    """
    samples: dict[str, float] = {}
    skipped = 0
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE.match(line)
        if m is None:
            skipped += 1
            continue
        try:
            value = float(m.group("value"))
        except ValueError:
            skipped += 1
            continue
        if not math.isfinite(value):
            skipped += 1
            continue
        samples.setdefault(m.group("name"), value)
    return samples, skipped


def render_exposition(names: Sequence[str], values: Sequence[float], extra: dict[str, float] | None = None) -> str:
    lines = []
    for name, value in zip(names, values):
        lines.append(f"# TYPE {name} gauge")
        lines.append(f"{name} {format_float(value)}")
    for name, value in (extra or {}).items():
        lines.append(f"{name} {format_float(value)}")
    return "\n".join(lines) + "\n"


def http_get(url: str, timeout: float = 5.0) -> str:
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            return resp.read().decode("utf-8")
    except (urllib.error.URLError, OSError) as exc:
        raise FetchError(f"GET {url} failed: {exc}") from exc


class ScrapeStats:
    def __init__(self) -> None:
        self.scrapes = 0
        self.skipped_lines = 0


def scrape(
    endpoint: str,
    metric_names: Sequence[str],
    clock: Clock | None = None,
    timeout: float = 5.0,
    stats: ScrapeStats | None = None,
) -> MultivariateSeries:
    """One-row series of the requested metrics, stamped with the scrape time."""
    clock = clock or WallClock()
    stamp = int(clock.now())
    samples, skipped = parse_exposition(http_get(endpoint, timeout))
    if skipped:
        log.warning("%s: skipped %d unparsable exposition lines", endpoint, skipped)
    if stats is not None:
        stats.scrapes += 1
        stats.skipped_lines += skipped
    missing = [m for m in metric_names if m not in samples]
    if missing:
        raise MissingMetricError(f"{endpoint} does not expose {missing}")
    row = np.array([[samples[m] for m in metric_names]])
    return MultivariateSeries(stamp, row, tuple(metric_names), 1)
