"""Exact derivative of the discrete control-to-state map.

The tangent is obtained by differentiating the two stepping maps of
:mod:`pfcontrol.state` (discretize-then-linearize), so it is exact for the
discrete scheme and its transpose is the discrete adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .errors import SingularJacobian, SolverError
from .grid import SpatialMesh, h1_semi_sq, l2_sq
from .state import StateSolution, mu_matrix, rho_jacobian, solve_state
from .timefields import h1_time_norm


class StepOperators:
    """LU factors of the per-step rho Jacobians and mu matrices of a state."""

    def __init__(self, state: StateSolution):
        mesh, params = state.mesh, state.params
        self.rho_lu = []
        self.mu_lu = []
        for m in range(1, state.N + 1):
            try:
                self.rho_lu.append(splu(rho_jacobian(mesh, params, state.spec, state.rho[m])))
                self.mu_lu.append(splu(mu_matrix(mesh, params, state.rho[m], state.rho[m - 1])))
            except RuntimeError as exc:  # SuperLU reports exact singularity this way
                raise SingularJacobian(f"singular step matrix at step {m}: {exc}") from exc

    def rho(self, m: int):
        return self.rho_lu[m - 1]

    def mu(self, m: int):
        return self.mu_lu[m - 1]


@dataclass(frozen=True)
class TangentSolution:
    xi: np.ndarray  # (N+1, n_nodes)
    eta: np.ndarray
    h: np.ndarray  # (N+1, n_boundary)


def solve_tangent(state: StateSolution, h: np.ndarray,
                  ops: StepOperators | None = None) -> TangentSolution:
    """Directional derivative ``(xi, eta)`` of the state in the control direction ``h``."""
    mesh, params = state.mesh, state.params
    h = np.asarray(h, dtype=float)
    if h.shape != state.u.shape:
        raise ValueError(f"direction has shape {h.shape}, expected {state.u.shape}")
    ops = ops or StepOperators(state)
    N, dt, k = state.N, params.dt, params.delay_k
    w = mesh.domain_weights
    b = mesh.boundary_nodes
    load = mesh.boundary_weights * params.alpha
    rho, mu = state.rho, state.mu

    xi = np.zeros((N + 1, mesh.n_nodes))
    eta = np.zeros_like(xi)
    for m in range(1, N + 1):
        rhs = w * (params.delta / dt) * xi[m - 1]
        if m > k:
            rhs += w * eta[m - k]
        xi[m] = ops.rho(m).solve(rhs)

        rhs = w * ((params.epsilon + 2.0 * rho[m]) * eta[m - 1]
                   - (3.0 * mu[m] - 2.0 * mu[m - 1]) * xi[m]
                   + mu[m] * xi[m - 1]) / dt
        rhs[b] += load * h[m]
        eta[m] = ops.mu(m).solve(rhs)
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(eta))):
        raise SingularJacobian("tangent solve produced non-finite values")
    return TangentSolution(xi, eta, h)


def y_norm(mesh: SpatialMesh, dt: float, xi: np.ndarray, eta: np.ndarray) -> float:
    """Discrete norm: max-in-time L2 plus L2-in-time H1, for both components."""
    total = 0.0
    for v in (xi, eta):
        l2 = np.array([l2_sq(mesh, row) for row in v])
        h1 = l2 + np.array([h1_semi_sq(mesh, row) for row in v])
        total += np.sqrt(l2.max()) + np.sqrt(dt * h1[1:].sum())
    return float(total)


@dataclass(frozen=True)
class TaylorRow:
    epsilon: float
    remainder: float
    order: float  # nan on the first row


def taylor_remainder_test(mesh, params, spec, init, u: np.ndarray, h: np.ndarray,
                          scales, base: StateSolution | None = None) -> list[TaylorRow]:
    """Remainders ``||S(u + e h) - S(u) - e DS(u) h||_Y`` and observed orders.

    Solver failures at a perturbed control (e.g. :class:`BarrierBreach`) are
    propagated unchanged.
    """
    base = base or solve_state(mesh, params, spec, init, u, adaptive=False, nonnegative=False)
    tan = solve_tangent(base, h)
    rows: list[TaylorRow] = []
    prev = None
    for eps in scales:
        pert = solve_state(mesh, params, spec, init, u + eps * np.asarray(h),
                           adaptive=False, nonnegative=False)
        r = y_norm(mesh, params.dt, pert.rho - base.rho - eps * tan.xi,
                   pert.mu - base.mu - eps * tan.eta)
        if prev is None or prev[1] == 0.0 or r == 0.0:
            order = float("nan")
        else:
            order = float(np.log(prev[1] / r) / np.log(prev[0] / eps))
        rows.append(TaylorRow(float(eps), float(r), order))
        prev = (eps, r)
    return rows


def tangent_bound_ratio(state: StateSolution, h: np.ndarray) -> float:
    """``||(xi, eta)||_Y / ||h||_{H1(0,T;L2(Gamma))}`` (empirical bound constant)."""
    tan = solve_tangent(state, h)
    hn = h1_time_norm(state.mesh, state.dt, h)
    if hn == 0.0:
        raise SolverError("zero direction has no bound ratio")
    return y_norm(state.mesh, state.dt, tan.xi, tan.eta) / hn
