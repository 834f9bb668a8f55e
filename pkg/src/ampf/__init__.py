"""Adaptive monitoring with probabilistic quantile forecasts.

A sink-side monitor forecasts every metric of a target, judges each forecast's
spread, and only fetches real values for the metrics it is unsure about.
"""

__version__ = "0.1.0"
