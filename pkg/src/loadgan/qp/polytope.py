"""Box + relative-ramp feasible set for one window of ``m`` fast samples."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from ..errors import ConfigError, EmptyPolytopeError

# row blocks of the stacked inequality system G z <= h
BLOCKS = ("box_lower", "box_upper", "ramp_up", "ramp_down")


@dataclass(frozen=True)
class RampBoxPolytope:
    """``k1*L <= z_i <= k2*U`` and ``(1-k3) z_{i-1} <= z_i <= (1+k3) z_{i-1}`` for i >= 2.

    Ramp rows only couple samples inside the window; the first sample of a
    window has no predecessor.
    """

    k1: float
    k2: float
    k3: float
    L: float
    U: float
    m: int

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "L", "U"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"m must be an integer >= 1, got {self.m}")
        if self.k3 < 0:
            raise ConfigError(f"k3 must be nonnegative, got {self.k3}")
        if self.k1 < 0:
            raise ConfigError(f"k1 must be nonnegative, got {self.k1}")
        if self.L > self.U:
            raise ConfigError(f"L={self.L} exceeds U={self.U}")
        if self.lower > self.upper:
            raise EmptyPolytopeError(
                f"empty box: k1*L = {self.lower} > k2*U = {self.upper}")
        if self.m > 1 and max(self.lower, 0.0) > self.upper:
            # a negative box admits no ramp-feasible point for k3 > 0
            raise EmptyPolytopeError("box lies below zero; ramp constraints make it empty")

    @property
    def lower(self) -> float:
        return self.k1 * self.L

    @property
    def upper(self) -> float:
        return self.k2 * self.U

    @property
    def n_constraints(self) -> int:
        return 4 * self.m - 2

    @cached_property
    def G(self) -> np.ndarray:
        m, up, dn = self.m, 1.0 + self.k3, 1.0 - self.k3
        G = np.zeros((self.n_constraints, m))
        eye = np.eye(m)
        G[:m] = -eye
        G[m:2 * m] = eye
        for i in range(1, m):
            r = 2 * m + i - 1
            G[r, i], G[r, i - 1] = 1.0, -up
            r = 3 * m - 1 + i - 1
            G[r, i], G[r, i - 1] = -1.0, dn
        G.setflags(write=False)
        return G

    @cached_property
    def h(self) -> np.ndarray:
        h = np.zeros(self.n_constraints)
        h[:self.m] = -self.lower
        h[self.m:2 * self.m] = self.upper
        h.setflags(write=False)
        return h

    def block_slices(self) -> dict[str, slice]:
        m = self.m
        return {"box_lower": slice(0, m), "box_upper": slice(m, 2 * m),
                "ramp_up": slice(2 * m, 3 * m - 1), "ramp_down": slice(3 * m - 1, 4 * m - 2)}

    def slack(self, z: np.ndarray) -> np.ndarray:
        """``h - G z`` for one window (m,) or a batch (B, m)."""
        return self.h - np.asarray(z) @ self.G.T

    def violations(self, z: np.ndarray, tol: float = 1e-8) -> dict[str, int]:
        """Count rows with ``G z - h > tol`` per constraint block."""
        s = self.slack(np.atleast_2d(z))
        return {name: int((s[:, sl] < -tol).sum()) for name, sl in self.block_slices().items()}

    def contains(self, z: np.ndarray, tol: float = 1e-8) -> bool:
        return bool(np.all(self.slack(z) >= -tol))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RampBoxPolytope":
        keys = {"k1", "k2", "k3", "L", "U", "m"}
        if set(d) != keys:
            raise ConfigError(f"polytope keys must be exactly {sorted(keys)}, got {sorted(d)}")
        return cls(float(d["k1"]), float(d["k2"]), float(d["k3"]), float(d["L"]),
                   float(d["U"]), int(d["m"]))

    @classmethod
    def from_json(cls, text: str) -> "RampBoxPolytope":
        return cls.from_dict(json.loads(text))


def build_polytope(k1, k2, k3, L, U, m) -> RampBoxPolytope:
    return RampBoxPolytope(float(k1), float(k2), float(k3), float(L), float(U), int(m))
