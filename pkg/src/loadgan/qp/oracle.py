"""Brute-force reference solution of the projection QP for small windows.

Every optimum is the projection of ``a`` onto the affine set of some linearly
independent subset of at most ``m`` tight rows, so enumerating those subsets
and keeping the best feasible candidate gives the exact answer.  Cost grows
combinatorially with the number of rows; only meant for tests.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from ..errors import ConfigError
from .polytope import RampBoxPolytope

MAX_M = 8


def _affine_maps(G, h, m):
    """Yield (P, q) with candidate z = P a + q for each independent row subset."""
    yield np.eye(m), np.zeros(m)
    p = G.shape[0]
    for k in range(1, m + 1):
        for rows in combinations(range(p), k):
            Gs = G[list(rows)]
            if np.linalg.matrix_rank(Gs) < k:
                continue
            inv = np.linalg.inv(Gs @ Gs.T)
            P = np.eye(m) - Gs.T @ inv @ Gs
            q = Gs.T @ inv @ h[list(rows)]
            yield P, q


def oracle_project(a, polytope: RampBoxPolytope, tol: float = 1e-9) -> np.ndarray:
    m = polytope.m
    if m > MAX_M:
        raise ConfigError(f"oracle_project enumerates active sets and refuses m > {MAX_M}")
    a = np.asarray(a, dtype=np.float64)
    A = np.atleast_2d(a)
    G, h = polytope.G, polytope.h
    best = np.full(A.shape, np.nan)
    best_obj = np.full(A.shape[0], np.inf)
    scale = tol * (1.0 + np.abs(h))
    for P, q in _affine_maps(G, h, m):
        Z = A @ P.T + q
        feasible = np.all(Z @ G.T - h <= scale, axis=1)
        obj = ((Z - A) ** 2).sum(axis=1)
        better = feasible & (obj < best_obj - 1e-15)
        best[better] = Z[better]
        best_obj[better] = obj[better]
    return best[0] if a.ndim == 1 else best
