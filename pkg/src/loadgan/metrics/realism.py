"""Fast-timescale realism statistics: peak relative step and peak injection."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ShapeError

EPS_DIV = 1e-6


@dataclass(frozen=True)
class RealismStats:
    max_change_pct: float | None
    max_injection_kw: float
    n_profiles: int

    def to_dict(self):
        return asdict(self)


def max_consecutive_change(profile, eps_div: float = EPS_DIV) -> float | None:
    """Largest percent change between consecutive samples.

    Pairs whose predecessor is at or below ``eps_div`` are skipped; ``None``
    means every pair was skipped and the metric is undefined.
    """
    z = np.asarray(profile, dtype=np.float64).ravel()
    if z.size < 2:
        raise ShapeError("a profile needs at least two samples")
    prev, cur = z[:-1], z[1:]
    ok = prev > eps_div
    if not ok.any():
        return None
    return float(100.0 * (np.abs(cur[ok] - prev[ok]) / prev[ok]).max())


def realism_stats(profiles, eps_div: float = EPS_DIV, window: int | None = None) -> RealismStats:
    """Aggregate over a set of profiles.

    With ``window`` set, each profile is split into windows of that length and
    steps across window boundaries are ignored.
    """
    P = np.asarray(profiles, dtype=np.float64)
    if P.ndim == 1:
        P = P[None, :]
    if P.shape[0] == 0:
        raise ShapeError("realism_stats needs at least one profile")
    rows = P if window is None else P.reshape(-1, window)
    changes = [c for c in (max_consecutive_change(r, eps_div) for r in rows) if c is not None]
    return RealismStats(max(changes) if changes else None, float(P.max()), int(P.shape[0]))
