"""Discrete adjoint: the exact transpose of :func:`pfcontrol.tangent.solve_tangent`.

Indexing convention.  The multipliers of the step ``m-1 -> m`` equations are
stored as the adjoint at the *left* end of that interval, ``p^{m-1}`` and
``q^{m-1}`` (scaled by ``1/dt``).  This makes the terminal conditions exact,

    q^N = 0,    delta p^N = rho^N - rho_T,

and the boundary pairing of the duality identity reads
``sum_{n=1}^N dt int_Gamma alpha q^{n-1} h^n``: the adjoint sits at the start
of each interval and the control at its implicit end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import CostSpec, cost_eval
from .state import StateSolution, solve_state
from .tangent import StepOperators, TangentSolution
from .timefields import q_inner, sigma_inner


@dataclass(frozen=True)
class AdjointSolution:
    p: np.ndarray  # (N+1, n_nodes)
    q: np.ndarray
    gradient: np.ndarray  # (N+1, n_boundary), L2(Sigma) representative; row 0 is zero


def _backward(state: StateSolution, ops: StepOperators, seed_xi: np.ndarray,
              seed_eta: np.ndarray, P_end: np.ndarray | None = None):
    """Solve ``G^T (P, Q) = (seed_xi, seed_eta)`` for the block-triangular tangent system.

    Rows ``1..N`` of the returned arrays hold the multipliers of the step
    equations; row ``N+1`` is the optional terminal block ``P_end``.
    """
    mesh, params = state.mesh, state.params
    N, dt, k = state.N, params.dt, params.delay_k
    w = mesh.domain_weights
    rho, mu = state.rho, state.mu
    n = mesh.n_nodes
    P = np.zeros((N + 2, n))
    Q = np.zeros((N + 2, n))
    if P_end is not None:
        P[N + 1] = P_end
    for m in range(N, 0, -1):
        rhs = np.array(seed_eta[m], dtype=float)
        if m + k <= N:
            rhs += w * P[m + k]
        if m < N:
            rhs += w * (params.epsilon + 2.0 * rho[m + 1]) * Q[m + 1] / dt
        Q[m] = ops.mu(m).solve(rhs, trans="T")

        rhs = np.array(seed_xi[m], dtype=float)
        rhs += w * (params.delta / dt) * P[m + 1]
        if m < N:
            rhs += w * mu[m + 1] * Q[m + 1] / dt
        rhs -= w * (3.0 * mu[m] - 2.0 * mu[m - 1]) * Q[m] / dt
        P[m] = ops.rho(m).solve(rhs, trans="T")
    return P, Q


def adjoint_action(state: StateSolution, seed_xi: np.ndarray, seed_eta: np.ndarray,
                   ops: StepOperators | None = None) -> np.ndarray:
    """Transpose of the tangent map for Euclidean seeds on every ``(xi^m, eta^m)``.

    Returns the boundary-time array ``T^* b`` such that
    ``sum(seed_xi * xi) + sum(seed_eta * eta) == sum(h * T^* b)``.
    """
    ops = ops or StepOperators(state)
    _, Q = _backward(state, ops, seed_xi, seed_eta)
    mesh = state.mesh
    out = np.zeros_like(state.u)
    load = mesh.boundary_weights * state.params.alpha
    out[1:] = load * Q[1:state.N + 1][:, mesh.boundary_nodes]
    return out


def solve_adjoint(state: StateSolution, cost: CostSpec,
                  ops: StepOperators | None = None) -> AdjointSolution:
    """Backward sweep for ``(p, q)`` and the reduced gradient ``beta1 u + alpha q``."""
    mesh, params = state.mesh, state.params
    N, dt = state.N, params.dt
    ops = ops or StepOperators(state)
    w = mesh.domain_weights
    seed_xi = np.zeros_like(state.rho)
    seed_eta = np.zeros_like(state.mu)
    seed_eta[1:] = cost.beta2 * dt * w * (state.mu[1:] - cost.mu_T[1:])
    p_T = (state.rho[N] - cost.rho_T) / params.delta
    P, Q = _backward(state, ops, seed_xi, seed_eta, P_end=dt * p_T)

    p = np.empty_like(state.rho)
    q = np.empty_like(state.mu)
    p[:N] = P[1:N + 1] / dt
    q[:N] = Q[1:N + 1] / dt
    p[N] = p_T
    q[N] = 0.0

    g = np.zeros_like(state.u)
    g[1:] = cost.beta1 * state.u[1:] + params.alpha * q[:N][:, mesh.boundary_nodes]
    return AdjointSolution(p, q, g)


@dataclass(frozen=True)
class DualityResult:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs) / (abs(self.lhs) + abs(self.rhs) + 1e-300)


def duality_sides(state: StateSolution, tangent: TangentSolution, adjoint: AdjointSolution,
                  cost: CostSpec) -> DualityResult:
    mesh, dt = state.mesh, state.dt
    lhs = (float(mesh.domain_weights @ ((state.rho[-1] - cost.rho_T) * tangent.xi[-1]))
           + cost.beta2 * q_inner(mesh, dt, state.mu - cost.mu_T, tangent.eta))
    # adjoint at the left end of each interval, direction at the right end
    aq = np.zeros_like(state.u)
    aq[1:] = state.params.alpha * adjoint.q[:-1][:, mesh.boundary_nodes]
    rhs = sigma_inner(mesh, dt, aq, tangent.h)
    return DualityResult(lhs, rhs)


def duality_check(state, tangent, adjoint, cost) -> float:
    """Relative mismatch between the tangent-weighted cost terms and the boundary pairing."""
    return duality_sides(state, tangent, adjoint, cost).residual


def reduced_cost(mesh, params, spec, init, cost: CostSpec, u: np.ndarray) -> float:
    state = solve_state(mesh, params, spec, init, u, adaptive=False, nonnegative=False)
    return cost_eval(state, u, cost).total


@dataclass(frozen=True)
class GradCheckRow:
    direction_id: int
    fd_value: float
    adjoint_value: float
    fd_step: float

    @property
    def rel_error(self) -> float:
        return abs(self.fd_value - self.adjoint_value) / max(abs(self.adjoint_value), 1e-300)


def gradient_check(mesh, params, spec, init, cost: CostSpec, u: np.ndarray, directions,
                   steps=(1e-4, 1e-5, 1e-6)) -> list[GradCheckRow]:
    """Compare adjoint directional derivatives with central differences of the reduced cost.

    For each direction the FD step is chosen by a sweep: the step whose
    estimate changes least when moving to the next smaller step.  The choice
    never looks at the adjoint value.
    """
    state = solve_state(mesh, params, spec, init, u, adaptive=False, nonnegative=False)
    adj = solve_adjoint(state, cost)
    rows = []
    for i, d in enumerate(directions):
        d = np.asarray(d, dtype=float)
        adj_val = sigma_inner(mesh, params.dt, adj.gradient, d)
        fds = [(reduced_cost(mesh, params, spec, init, cost, u + s * d)
                - reduced_cost(mesh, params, spec, init, cost, u - s * d)) / (2 * s)
               for s in steps]
        if len(steps) == 1:
            best = 0
        else:
            jumps = [abs(fds[j] - fds[j + 1]) for j in range(len(steps) - 1)]
            best = int(np.argmin(jumps))
        rows.append(GradCheckRow(i, float(fds[best]), float(adj_val), float(steps[best])))
    return rows
