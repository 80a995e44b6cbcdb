from .polytope import RampBoxPolytope, build_polytope
from .solver import QpSolution, SolverConfig, kkt_residuals, project
from .backward import DegenerateDerivativeWarning, jacobian, qp_backward
from .oracle import oracle_project

__all__ = ["RampBoxPolytope", "build_polytope", "QpSolution", "SolverConfig", "project",
           "kkt_residuals", "qp_backward", "jacobian", "DegenerateDerivativeWarning",
           "oracle_project"]
from .layer import projection
__all__.append("projection")
