"""The projection as a node of the autodiff graph."""

from __future__ import annotations

import numpy as np

from ..autodiff.tensor import Value, as_value, make
from .backward import qp_backward
from .polytope import RampBoxPolytope
from .solver import QpSolution, SolverConfig, project


def projection(a, polytope: RampBoxPolytope, cfg: SolverConfig | None = None,
               windows: int = 1) -> tuple[Value, QpSolution]:
    """Project each of ``windows`` consecutive length-m blocks of every row of ``a``.

    ``a`` has shape (batch, windows*m); windows are independent QP instances.
    """
    a = as_value(a)
    cfg = cfg or SolverConfig()
    B = a.shape[0]
    flat = a.data.reshape(B * windows, polytope.m)
    sol = project(flat, polytope, cfg)

    def vjp(g):
        gin = qp_backward(sol, polytope, g.reshape(B * windows, polytope.m), cfg)
        return (gin.reshape(a.shape),)

    return make(sol.z_star.reshape(a.shape), (a,), "qp_projection", vjp), sol
