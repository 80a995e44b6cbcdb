"""Forward solve of the projection QP

    minimize  sum_i (z_i - a_i)^2   subject to  G z <= h

for a batch of independent inputs ``a``.  A batched Mehrotra
predictor-corrector interior-point method gets close to the optimum; each
instance is then polished by solving the equality-constrained problem on its
identified active set, which recovers the exact vertex/face solution even when
the optimum is degenerate (zero multipliers on tight rows).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import nnls

from ..errors import ConfigError, NonConvergenceError
from .polytope import RampBoxPolytope

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-8
    stat_tol: float = 1e-8
    comp_tol: float = 1e-8
    active_tol: float = 1e-6
    max_iterations: int = 100
    polish: bool = True

    def __post_init__(self):
        for name in ("feas_tol", "stat_tol", "comp_tol", "active_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")


@dataclass
class QpSolution:
    """Optimal point, multipliers and diagnostics.

    Arrays carry a leading batch axis when ``project`` was given a batch.
    ``duals`` and ``active_mask`` follow the row order of ``polytope.G``.
    """

    z_star: np.ndarray
    duals: np.ndarray
    active_mask: np.ndarray
    slack: np.ndarray
    solver_stats: dict = field(default_factory=dict)

    def diagnostics_json(self) -> str:
        stats = {k: np.asarray(v).tolist() for k, v in self.solver_stats.items()}
        return json.dumps(stats)


def kkt_residuals(z, lam, a, polytope: RampBoxPolytope):
    """Per-instance (primal, dual-sign, complementarity, stationarity) residuals."""
    z, lam, a = np.atleast_2d(z), np.atleast_2d(lam), np.atleast_2d(a)
    s = polytope.slack(z)
    primal = np.maximum(-s, 0.0).max(axis=1)
    dual = np.maximum(-lam, 0.0).max(axis=1)
    comp = np.abs(lam * np.maximum(s, 0.0)).max(axis=1)
    stat = np.abs(2.0 * (z - a) + lam @ polytope.G).max(axis=1)
    return primal, dual, comp, stat


def _max_step(x, dx):
    """Largest alpha in [0, 1] keeping x + alpha*dx >= 0, rowwise."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dx < 0, -x / dx, np.inf)
    return np.minimum(1.0, ratio.min(axis=1))


def _normal_matrix(W, m, up, dn):
    """``2I + G^T diag(W) G`` assembled from the tridiagonal row structure."""
    wl, wu = W[:, :m], W[:, m:2 * m]
    wr, wd = W[:, 2 * m:3 * m - 1], W[:, 3 * m - 1:]
    diag = 2.0 + wl + wu
    diag[:, 1:] += wr + wd
    diag[:, :-1] += up * up * wr + dn * dn * wd
    off = -(up * wr + dn * wd)
    H = np.zeros((W.shape[0], m, m))
    i = np.arange(m)
    H[:, i, i] = diag
    H[:, i[1:], i[:-1]] = off
    H[:, i[:-1], i[1:]] = off
    return H


_W_MAX = 1e14


def _scale(a, h):
    """Tolerances are relative to the magnitude of the data (at least 1)."""
    return np.maximum(1.0, np.maximum(np.abs(a).max(axis=-1), np.abs(h).max()))

_FLOOR = 1e-18


def _interior_point(a, G, h, cfg: SolverConfig, lo: float, hi: float, k3: float):
    B, m = a.shape
    p = G.shape[0]
    z = np.clip(a, lo, hi)
    s = np.maximum(h - z @ G.T, 1.0)
    lam = np.ones((B, p))
    iters = np.zeros(B, dtype=int)
    done = np.zeros(B, dtype=bool)

    scale = _scale(a, h)
    for it in range(cfg.max_iterations):
        rd = 2.0 * (z - a) + lam @ G
        rp = z @ G.T + s - h
        comp = s * lam
        ok = ((np.abs(rp).max(1) <= cfg.feas_tol)
              & (np.abs(rd).max(1) <= cfg.stat_tol * scale)
              & (comp.max(1) <= cfg.comp_tol * scale * scale))
        done |= ok
        if done.all():
            break
        idx = np.flatnonzero(~done)
        iters[idx] += 1
        zi, si, li = z[idx], s[idx], lam[idx]
        rdi, rpi, ci = rd[idx], rp[idx], comp[idx]
        # 2I + G^T W G is positive definite for any finite W >= 0
        W = np.minimum(li / si, _W_MAX)
        H = _normal_matrix(W, m, 1.0 + k3, 1.0 - k3)

        def solve(rc):
            rhs = -rdi - (W * rpi - rc / si) @ G
            dz = np.linalg.solve(H, rhs[..., None])[..., 0]
            Gdz = dz @ G.T
            dl = W * (Gdz + rpi) - rc / si
            ds = -rpi - Gdz
            return dz, ds, dl

        dz, ds, dl = solve(ci)
        a_aff = np.minimum(_max_step(si, ds), _max_step(li, dl))[:, None]
        mu = ci.mean(1, keepdims=True)
        mu_aff = ((si + a_aff * ds) * (li + a_aff * dl)).mean(1, keepdims=True)
        sigma = np.clip(mu_aff / np.maximum(mu, 1e-300), 0.0, 1.0) ** 3
        dz, ds, dl = solve(ci + ds * dl - sigma * mu)
        alpha = 0.99 * np.minimum(_max_step(si, ds), _max_step(li, dl))[:, None]
        alpha = np.minimum(alpha, 1.0)
        z[idx] = zi + alpha * dz
        s[idx] = np.maximum(si + alpha * ds, _FLOOR)
        lam[idx] = np.maximum(li + alpha * dl, _FLOOR)
        bad = ~(np.isfinite(z).all(1) & np.isfinite(s).all(1) & np.isfinite(lam).all(1))
        if bad.any():
            # leave these to the active-set fallback
            z[bad], s[bad], lam[bad] = np.clip(a[bad], lo, hi), 1.0, 1.0
            done |= bad
    return z, s, lam, iters, done


def _polish_one(a, G, h, guess, cfg: SolverConfig, passes: int = 4):
    """Exact solve on an active-set guess, refined a few times if KKT checks fail."""
    active = guess.copy()
    sc = float(_scale(a, h))
    for _ in range(passes):
        idx = np.flatnonzero(active)
        if idx.size:
            Gc = G[idx]
            r = Gc @ a - h[idx]
            try:
                y = np.linalg.solve(Gc @ Gc.T, r)
                z, lam_c = a - Gc.T @ y, 2.0 * y
                fast = np.all(lam_c >= -cfg.feas_tol) and np.abs(Gc @ z - h[idx]).max() <= 1e-10 * sc
            except np.linalg.LinAlgError:
                fast = False
            if not fast:
                # rank-deficient or ambiguous: the projection onto {Gc z = hc} is
                # still unique, the multipliers are recovered with a sign constraint
                z = a - np.linalg.lstsq(Gc, r, rcond=None)[0]
                lam_c, res = nnls(Gc.T, 2.0 * (a - z))
                if res > cfg.stat_tol * sc:
                    lam_c = np.linalg.lstsq(Gc.T, 2.0 * (a - z), rcond=None)[0]
        else:
            z, lam_c = a.copy(), np.zeros(0)
        lam = np.zeros(G.shape[0])
        lam[idx] = lam_c
        slack = h - G @ z
        viol = slack < -cfg.feas_tol
        neg = lam < -cfg.feas_tol * sc
        stat = np.abs(2.0 * (z - a) + G.T @ lam).max()
        if not viol.any() and not neg.any() and stat <= cfg.stat_tol * sc:
            return z, lam
        active = (active & ~neg) | viol
    return None


def _active_set_one(a, G, h, z0, cfg: SolverConfig, max_iter: int = 500):
    """Primal active-set method from a feasible start; slow but always finishes."""
    z = z0.copy()
    sc = float(_scale(a, h))
    work: list[int] = []
    for _ in range(max_iter):
        if work:
            Gw = G[work]
            d = a - z
            # step to the minimizer on the current working face
            p = d - Gw.T @ np.linalg.lstsq(Gw @ Gw.T, Gw @ d, rcond=None)[0]
        else:
            p = a - z
        if np.abs(p).max() <= 1e-12 * sc:
            lam = np.zeros(G.shape[0])
            if work:
                lw = np.linalg.lstsq(G[work].T, 2.0 * (a - z), rcond=None)[0]
                j = int(np.argmin(lw))
                if lw[j] < -cfg.feas_tol * sc:
                    work.pop(j)
                    continue
                lam[work] = np.maximum(lw, 0.0)
            return z, lam
        Gp = G @ p
        slack = h - G @ z
        # p lies in null(G_W); the relative threshold keeps G_W independent
        thresh = 1e-12 * np.abs(p).max() * np.abs(G).sum(axis=1)
        cand = np.flatnonzero((Gp > thresh) & ~np.isin(np.arange(G.shape[0]), work))
        alpha, block = 1.0, None
        if cand.size:
            ratios = np.maximum(slack[cand], 0.0) / Gp[cand]
            j = int(np.argmin(ratios))
            if ratios[j] < 1.0:
                alpha, block = ratios[j], int(cand[j])
        z = z + alpha * p
        if block is not None:
            work.append(block)
    return None


def project(a, polytope: RampBoxPolytope, cfg: SolverConfig | None = None) -> QpSolution:
    """Euclidean projection of ``a`` onto ``polytope`` (one window or a batch)."""
    cfg = cfg or SolverConfig()
    a = np.asarray(a, dtype=np.float64)
    single = a.ndim == 1
    A = np.atleast_2d(a)
    if A.ndim != 2 or A.shape[1] != polytope.m:
        raise ConfigError(f"expected inputs of length m={polytope.m}, got shape {a.shape}")
    if not np.all(np.isfinite(A)):
        raise ConfigError("projection inputs must be finite")
    G, h = polytope.G, polytope.h
    B = A.shape[0]

    if B:
        z, s, lam, iters, converged = _interior_point(A, G, h, cfg, polytope.lower, polytope.upper,
                                                 polytope.k3)
    else:
        z, s, lam = np.zeros((0, polytope.m)), np.zeros((0, G.shape[0])), np.zeros((0, G.shape[0]))
        iters, converged = np.zeros(0, int), np.zeros(0, bool)

    polished = np.zeros(B, dtype=bool)
    if cfg.polish:
        for b in range(B):
            out = _polish_one(A[b], G, h, s[b] < lam[b], cfg)
            if out is None:
                # constant midpoint: strictly inside every box and ramp row
                z0 = np.full(polytope.m, 0.5 * (polytope.lower + polytope.upper))
                out = _active_set_one(A[b], G, h, z0, cfg)
            if out is not None:
                z[b], lam[b] = out
                polished[b] = True
    primal, dual, comp, stat = kkt_residuals(z, lam, A, polytope)
    ok = polished | converged
    ok &= (primal <= cfg.feas_tol) & (dual <= cfg.feas_tol * _scale(A, h))
    stats = {"iterations": iters, "polished": polished, "converged": ok,
             "primal_residual": primal, "dual_residual": dual,
             "complementarity": comp, "stationarity": stat}
    if not ok.all():
        bad = np.flatnonzero(~ok)
        raise NonConvergenceError(
            f"QP projection failed for {bad.size} of {B} instances "
            f"(max primal residual {primal[bad].max():.3e}, stationarity {stat[bad].max():.3e})",
            diagnostics={k: np.asarray(v)[bad].tolist() for k, v in stats.items()})

    slack = polytope.slack(z)
    active = slack < cfg.active_tol
    if single:
        return QpSolution(z[0], lam[0], active[0], slack[0], {k: v[0] for k, v in stats.items()})
    return QpSolution(z, lam, active, slack, stats)
