"""Estimation of the box/ramp constraint parameters from historical data."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError, DataError
from ..qp.polytope import RampBoxPolytope
from .meter import MeterSeries

EPS_DIV = 1e-6


@dataclass(frozen=True)
class ConstraintParams:
    k1: float
    k2: float
    k3: float
    L: float
    U: float

    def __post_init__(self):
        # reuse the polytope checks (m is irrelevant to them beyond m > 1)
        RampBoxPolytope(self.k1, self.k2, self.k3, self.L, self.U, 2)

    def polytope(self, m: int) -> RampBoxPolytope:
        return RampBoxPolytope(self.k1, self.k2, self.k3, self.L, self.U, int(m))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintParams":
        keys = {"k1", "k2", "k3", "L", "U"}
        if not keys <= set(d) or set(d) - keys - {"m"}:
            raise ConfigError(f"constraint params need exactly {sorted(keys)}, got {sorted(d)}")
        return cls(*(float(d[k]) for k in ("k1", "k2", "k3", "L", "U")))


def _values(x) -> np.ndarray:
    return x.loads if isinstance(x, MeterSeries) else np.asarray(x, dtype=np.float64)


def max_relative_step(fast, eps_div: float = EPS_DIV) -> float:
    """Largest ``|z_i - z_{i-1}| / z_{i-1}`` over consecutive pairs with ``z_{i-1} > eps_div``.

    A 2-D array is treated as independent rows (no pairs across rows).
    """
    z = np.atleast_2d(_values(fast))
    prev, cur = z[:, :-1], z[:, 1:]
    ok = prev > eps_div
    if not ok.any():
        return 0.0
    return float((np.abs(cur - prev)[ok] / prev[ok]).max())


def estimate_params(fast, slow, k1: float | None = None, k2: float | None = None,
                    k3: float | None = None, eps_div: float = EPS_DIV) -> ConstraintParams:
    """L and U from the slow data; k1, k2, k3 from the fast data when given.

    Explicit ``k1``/``k2``/``k3`` arguments override the estimates.  Without
    fast data ``k2`` and ``k3`` are mandatory and ``k1`` defaults to 0.
    """
    sv = _values(slow)
    if sv.size == 0:
        raise DataError("slow series is empty")
    L, U = float(sv.min()), float(sv.max())
    if U == 0:
        raise DataError("degenerate data: maximum slow reading is 0")
    if fast is None:
        if k2 is None or k3 is None:
            raise ConfigError("without fast data, k2 and k3 must be supplied explicitly")
        return ConstraintParams(0.0 if k1 is None else float(k1), float(k2), float(k3), L, U)
    fv = _values(fast)
    if fv.size == 0:
        raise DataError("fast series is empty")
    fmin, fmax = float(fv.min()), float(fv.max())
    est_k1 = 0.0 if fmin == 0 or L == 0 else fmin / L
    est_k2 = fmax / U
    est_k3 = max_relative_step(fast, eps_div)
    return ConstraintParams(est_k1 if k1 is None else float(k1),
                            est_k2 if k2 is None else float(k2),
                            est_k3 if k3 is None else float(k3), L, U)
