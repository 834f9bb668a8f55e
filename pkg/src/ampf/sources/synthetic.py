"""Seeded multi-metric workload generator driven by a periodic message rate."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError
from ..series import MultivariateSeries

EQUATIONS = (
    "clean[t] = rate_base + sum_j rate_amplitudes[j] * sin(2*pi*t / rate_periods[j])",
    "rate[t] = max(0, clean[t] + rate_noise * (clean[t] / rate_base) * u1[t])",
    "cpu[t] = max(0, cpu_a * rate[t] / (cpu_b + rate[t]) + cpu_noise * u2[t])",
    "level[0] = mem_gain * rate[0]; level[t] = (1 - mem_decay) * level[t-1] + mem_decay * mem_gain * rate[t]",
    "mem[t] = max(0, level[t] + mem_noise * u3[t])",
    "net[t] = max(0, net_c * rate[t] + net_noise * u4[t])",
    "u1..u4 ~ iid Uniform(-1, 1) from numpy default_rng(seed), drawn as one (T, 4) block",
)


@dataclass(frozen=True)
class SyntheticWorkloadConfig:
    seed: int = 0
    duration: int = 20000
    start_timestamp: int = 1_672_531_200  # 2023-01-01T00:00:00Z
    rate_base: float = 100.0
    rate_amplitudes: tuple[float, ...] = (40.0, 15.0)
    rate_periods: tuple[float, ...] = (86400.0, 604800.0)
    rate_noise: float = 3.0
    cpu_a: float = 100.0
    cpu_b: float = 60.0
    cpu_noise: float = 0.5
    mem_decay: float = 0.02
    mem_gain: float = 20.0
    mem_noise: float = 10.0
    net_c: float = 12.5
    net_noise: float = 15.0

    def __post_init__(self) -> None:
        if self.duration < 1:
            raise ConfigError("duration must be >= 1")
        if len(self.rate_amplitudes) != len(self.rate_periods):
            raise ConfigError("rate_amplitudes and rate_periods must pair up")
        if any(p <= 0 for p in self.rate_periods):
            raise ConfigError("rate periods must be positive")
        if not 0.0 < self.mem_decay <= 1.0:
            raise ConfigError("mem_decay must be in (0, 1]")
        if self.rate_base <= 0:
            raise ConfigError("rate_base must be positive")
        object.__setattr__(self, "rate_amplitudes", tuple(float(a) for a in self.rate_amplitudes))
        object.__setattr__(self, "rate_periods", tuple(float(p) for p in self.rate_periods))

    def metadata(self) -> dict:
        return {"config": asdict(self), "equations": list(EQUATIONS)}


METRICS = ("rate", "cpu", "mem", "net")


def clean_rate(cfg: SyntheticWorkloadConfig, t: np.ndarray) -> np.ndarray:
    out = np.full(t.shape, cfg.rate_base, dtype=np.float64)
    for amp, period in zip(cfg.rate_amplitudes, cfg.rate_periods):
        out += amp * np.sin(2 * np.pi * t / period)
    return out


def generate_synthetic(cfg: SyntheticWorkloadConfig) -> MultivariateSeries:
    """1 Hz series with columns rate, cpu, mem, net (see ``EQUATIONS``)."""
    T = cfg.duration
    t = np.arange(T, dtype=np.float64)
    u = np.random.default_rng(cfg.seed).uniform(-1.0, 1.0, size=(T, 4))
    clean = clean_rate(cfg, t)
    rate = np.maximum(0.0, clean + cfg.rate_noise * (clean / cfg.rate_base) * u[:, 0])
    cpu = np.maximum(0.0, cfg.cpu_a * rate / (cfg.cpu_b + rate) + cfg.cpu_noise * u[:, 1])
    level = np.empty(T)
    level[0] = cfg.mem_gain * rate[0]
    for i in range(1, T):
        level[i] = (1.0 - cfg.mem_decay) * level[i - 1] + cfg.mem_decay * cfg.mem_gain * rate[i]
    mem = np.maximum(0.0, level + cfg.mem_noise * u[:, 2])
    net = np.maximum(0.0, cfg.net_c * rate + cfg.net_noise * u[:, 3])
    return MultivariateSeries(cfg.start_timestamp, np.column_stack([rate, cpu, mem, net]), METRICS, 1)
