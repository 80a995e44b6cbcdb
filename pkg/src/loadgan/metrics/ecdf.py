"""Empirical CDFs and the two-sample Kolmogorov-Smirnov distance."""

from __future__ import annotations

import csv

import numpy as np

from ..errors import DataError


class Ecdf:
    """Right-continuous step function ``F(x) = #{samples <= x} / n``."""

    def __init__(self, samples):
        x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
        if x.size == 0:
            raise DataError("ECDF of an empty sample")
        self.values = x

    @property
    def n(self) -> int:
        return self.values.size

    def counts(self, x) -> np.ndarray:
        return np.searchsorted(self.values, x, side="right")

    def __call__(self, x):
        return self.counts(x) / self.n

    def steps(self):
        """Distinct jump points and F at each of them."""
        u = np.unique(self.values)
        return u, self(u)

    def to_csv(self, path):
        xs, fs = self.steps()
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["value", "F"])
            for x, p in zip(xs, fs):
                w.writerow([repr(float(x)), repr(float(p))])


def ecdf(samples) -> Ecdf:
    return Ecdf(samples)


def ks_distance(a: Ecdf, b: Ecdf) -> float:
    """Exact sup-norm distance; the supremum is attained at a pooled sample point."""
    pts = np.concatenate([a.values, b.values])
    return float(np.abs(a(pts) - b(pts)).max())
