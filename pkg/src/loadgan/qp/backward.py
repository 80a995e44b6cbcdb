"""Vector-Jacobian product of the projection by implicit differentiation.

At the optimum the differential KKT conditions read

    2 dz - 2 da + G_A^T dlam_A = 0
    G_i dz = 0                        for strongly active rows i
    dlam_i = 0                        for inactive rows

Weakly active rows (tight, multiplier ~ 0) contribute a vanishing equation;
those instances are resolved with a minimum-norm least-squares solve.
"""

from __future__ import annotations

import warnings

import numpy as np

from .polytope import RampBoxPolytope
from .solver import QpSolution, SolverConfig


class DegenerateDerivativeWarning(RuntimeWarning):
    pass


def _vjp_one(g, G, slack, lam, active_tol):
    active = slack < active_tol
    strong = active & (lam > active_tol)
    weak = active & ~strong
    if not weak.any():
        Gs = G[strong]
        if Gs.shape[0] == 0:
            return g.copy()
        # remove the component of g in the row space of the active constraints
        c = np.linalg.lstsq(Gs.T, g, rcond=None)[0]
        return g - Gs.T @ c
    m = G.shape[1]
    Ga = G[active]
    Ma = np.where(strong[active][:, None], Ga, 0.0)
    k = Ga.shape[0]
    K = np.zeros((m + k, m + k))
    K[:m, :m] = 2.0 * np.eye(m)
    K[:m, m:] = Ga.T
    K[m:, :m] = Ma
    rhs = np.concatenate([g, np.zeros(k)])
    y, _, rank, _ = np.linalg.lstsq(K.T, rhs, rcond=None)
    # each weakly active row removes one rank by construction; anything more
    # means dependent tight rows and the derivative is only a least-squares pick
    if rank < m + k - int(weak.sum()):
        warnings.warn("degenerate KKT system in projection backward "
                      f"(rank {rank} of {m + k}, {int(weak.sum())} weakly active rows)",
                      DegenerateDerivativeWarning, stacklevel=3)
    return 2.0 * y[:m]


def qp_backward(sol: QpSolution, polytope: RampBoxPolytope, grad_out,
                cfg: SolverConfig | None = None) -> np.ndarray:
    """Map dloss/dz* to dloss/da for one window or a batch."""
    cfg = cfg or SolverConfig()
    g = np.asarray(grad_out, dtype=np.float64)
    single = g.ndim == 1
    g2 = np.atleast_2d(g)
    slack = np.atleast_2d(sol.slack)
    lam = np.atleast_2d(sol.duals)
    G = polytope.G
    out = np.empty_like(g2)
    for b in range(g2.shape[0]):
        out[b] = _vjp_one(g2[b], G, slack[b], lam[b], cfg.active_tol)
    return out[0] if single else out


def jacobian(sol: QpSolution, polytope: RampBoxPolytope, cfg: SolverConfig | None = None):
    """Dense dz*/da (symmetric for projections); shape (m, m), or (B, m, m) for a batch."""
    m = polytope.m
    z = np.asarray(sol.z_star)
    if z.ndim == 1:
        return np.array([qp_backward(sol, polytope, e, cfg) for e in np.eye(m)]).T
    cols = [qp_backward(sol, polytope, np.broadcast_to(e, z.shape), cfg) for e in np.eye(m)]
    return np.stack(cols, axis=1).transpose(0, 2, 1)
