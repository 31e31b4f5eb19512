"""Optimal boundary control of a phase-field system with a logarithmic potential and a
time-delayed coupling, discretized by finite differences on uniform grids."""

from .adjoint import (AdjointSolution, duality_check, gradient_check, reduced_cost,
                      solve_adjoint)
from .config import RunConfig, parse_config
from .cost import CostBreakdown, CostSpec, cost_eval
from .errors import (BarrierBreach, ConfigError, DegenerateInput, DiagonalLoss, DomainError,
                     LineSearchFail, NonConvergence, ParseError, PhaseFieldError,
                     ProjectionStall, ShapeMismatch, SingularJacobian, SolverError,
                     ValidationError)
from .grid import NEUMANN, BcSpec, SpatialMesh, apply_laplacian, build_mesh
from .optimize import AdmissibleSet, OptimizerConfig, optimize, project_admissible, vi_residual
from .potential import PotentialSpec, f_prime, f_second, f_third, f_value
from .state import InitialData, ModelParams, NewtonConfig, StateSolution, solve_state
from .tangent import solve_tangent, taylor_remainder_test, y_norm

__version__ = "0.1.0"
