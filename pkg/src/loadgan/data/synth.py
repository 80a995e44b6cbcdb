"""Synthetic ground truth: bounded multiplicative random walk at 1-minute resolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .meter import MeterSeries, parse_timestamp

FAST_RESOLUTION = 60
SLOW_RESOLUTION = 900


@dataclass(frozen=True)
class SyntheticProcessConfig:
    L_true: float = 0.55
    U_true: float = 10.26
    k3_true: float = 0.5
    n_days: int = 60
    seed: int = 0
    start: str = "2018-06-01T00:00:00Z"
    init: str = "uniform"

    def __post_init__(self):
        if not 0 <= self.L_true < self.U_true:
            raise ConfigError("need 0 <= L_true < U_true")
        if not 0 < self.k3_true <= 1:
            raise ConfigError("k3_true must lie in (0, 1]")
        if self.n_days < 1:
            raise ConfigError("n_days must be >= 1")
        if self.init != "uniform":
            raise ConfigError(f"unsupported init distribution {self.init!r}")


def random_walk(n: int, lo: float, hi: float, k3: float, rng: np.random.Generator) -> np.ndarray:
    z = np.empty(n)
    z[0] = rng.uniform(lo, hi)
    u = rng.uniform(-k3, k3, n)
    for i in range(1, n):
        prev = z[i - 1]
        nxt = min(max(prev * (1.0 + u[i]), lo), hi)
        # clamping pulls toward prev so this only guards against float edge cases
        while abs(nxt - prev) > k3 * prev:
            nxt = min(max(prev * (1.0 + rng.uniform(-k3, k3)), lo), hi)
        z[i] = nxt
    return z


def synth_ground_truth(cfg: SyntheticProcessConfig) -> tuple[MeterSeries, MeterSeries]:
    rng = np.random.default_rng(cfg.seed)
    n_fast = cfg.n_days * 24 * 60
    fast = random_walk(n_fast, cfg.L_true, cfg.U_true, cfg.k3_true, rng)
    t0 = parse_timestamp(cfg.start)
    per = SLOW_RESOLUTION // FAST_RESOLUTION
    slow = fast.reshape(-1, per).mean(axis=1)
    fast_ts = t0 + np.arange(n_fast) * np.timedelta64(FAST_RESOLUTION, "s")
    slow_ts = t0 + np.arange(slow.size) * np.timedelta64(SLOW_RESOLUTION, "s")
    return (MeterSeries(fast_ts, fast, FAST_RESOLUTION),
            MeterSeries(slow_ts, slow, SLOW_RESOLUTION))
