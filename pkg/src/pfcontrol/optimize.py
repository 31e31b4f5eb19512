"""Projected-gradient optimal boundary control with Armijo backtracking."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .adjoint import solve_adjoint
from .cost import CostBreakdown, CostSpec, cost_eval
from .errors import LineSearchFail, ProjectionStall
from .grid import SpatialMesh
from .state import solve_state
from .timefields import rate_norm, sigma_inner, sigma_norm

log = logging.getLogger(__name__)

__all__ = [
    "AdmissibleSet", "OptimizerConfig", "OptimizationTrace", "TraceRow",
    "cost_eval", "project_admissible", "vi_residual", "optimize",
]


@dataclass(frozen=True)
class AdmissibleSet:
    """Box ``U1 <= v <= U2`` on Sigma intersected with ``||v_t|| <= R``.

    ``U1`` and ``U2`` are boundary-time arrays of shape ``(N+1, n_boundary)``
    (scalars are broadcast by :meth:`constant`).  ``u_lower``/``u_upper`` are
    the uniform constants bracketing the bounds.
    """

    U1: np.ndarray
    U2: np.ndarray
    R: float
    u_lower: float
    u_upper: float

    def __post_init__(self):
        U1 = np.asarray(self.U1, dtype=float)
        U2 = np.asarray(self.U2, dtype=float)
        object.__setattr__(self, "U1", U1)
        object.__setattr__(self, "U2", U2)
        if U1.shape != U2.shape:
            raise ValueError("U1 and U2 must have the same shape")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if not 0 < self.u_lower <= self.u_upper:
            raise ValueError("need 0 < u_lower <= u_upper")
        if np.any(U1 > U2):
            raise ValueError("U1 <= U2 violated")
        if U1.min() < self.u_lower or U2.max() > self.u_upper:
            raise ValueError("u_lower <= U1 <= U2 <= u_upper violated")

    @classmethod
    def constant(cls, U1: float, U2: float, R: float, N: int, n_boundary: int,
                 u_lower: float | None = None, u_upper: float | None = None):
        shape = (N + 1, n_boundary)
        return cls(np.full(shape, float(U1)), np.full(shape, float(U2)), float(R),
                   float(U1 if u_lower is None else u_lower),
                   float(U2 if u_upper is None else u_upper))

    def midpoint(self) -> np.ndarray:
        # the box midpoint is time-constant when the bounds are, so ||v_t|| = 0
        return 0.5 * (self.U1 + self.U2)


@dataclass(frozen=True)
class OptimizerConfig:
    s0: float = 1.0
    sigma: float = 1e-4
    shrink: float = 0.5
    max_iter: int = 100
    vi_tol: float = 1e-6
    max_sweeps: int = 50
    min_step: float = 1e-12
    bb_steps: bool = True
    max_step: float = 1e6

    def __post_init__(self):
        if not (self.s0 > 0 and 0 < self.sigma < 1 and 0 < self.shrink < 1
                and self.max_iter >= 0 and self.vi_tol > 0 and self.max_sweeps >= 1
                and 0 < self.min_step <= self.max_step):
            raise ValueError("invalid optimizer configuration")


def _box_violation(v, aset) -> float:
    return float(max(np.max(aset.U1 - v, initial=0.0), np.max(v - aset.U2, initial=0.0)))


def project_admissible(mesh: SpatialMesh, dt: float, v: np.ndarray, aset: AdmissibleSet,
                       max_sweeps: int = 50) -> np.ndarray:
    """Feasible approximation of the projection onto the admissible set.

    Alternates a pointwise clip with a contraction of each boundary node's
    temporal fluctuation about its mean by the largest factor that restores
    ``||v_t|| <= R``.  Admissible input is returned unchanged.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != aset.U1.shape:
        raise ValueError(f"control has shape {v.shape}, bounds have {aset.U1.shape}")
    if _box_violation(v, aset) == 0.0 and rate_norm(mesh, dt, v) <= aset.R:
        return v.copy()
    out = np.clip(v, aset.U1, aset.U2)
    for _ in range(max_sweeps):
        rate = rate_norm(mesh, dt, out)
        if rate <= aset.R:
            return out
        mean = out.mean(axis=0)
        out = mean + (aset.R / rate) * (out - mean)
        out = np.clip(out, aset.U1, aset.U2)
    rate = rate_norm(mesh, dt, out)
    if rate <= aset.R * (1 + 1e-12) and _box_violation(out, aset) == 0.0:
        return out
    raise ProjectionStall(max_sweeps, _box_violation(out, aset), rate - aset.R)


def vi_residual(mesh: SpatialMesh, dt: float, u: np.ndarray, g: np.ndarray,
                aset: AdmissibleSet) -> float:
    """``||u - clip(u - g, U1, U2)||_{L2(Sigma)}``, zero exactly at box-stationary points."""
    return sigma_norm(mesh, dt, u - np.clip(u - g, aset.U1, aset.U2))


def rate_active(mesh: SpatialMesh, dt: float, u: np.ndarray, aset: AdmissibleSet,
                rtol: float = 1e-8) -> bool:
    return rate_norm(mesh, dt, u) >= aset.R * (1 - rtol)


def active_fraction(u: np.ndarray, aset: AdmissibleSet, atol: float = 1e-12) -> float:
    act = (u[1:] <= aset.U1[1:] + atol) | (u[1:] >= aset.U2[1:] - atol)
    return float(act.mean())


@dataclass(frozen=True)
class TraceRow:
    iter: int
    J: float
    J_terminal: float
    J_control: float
    J_tracking: float
    vi_residual: float
    step: float
    active_fraction: float
    rate_active: bool


@dataclass
class OptimizationTrace:
    rows: list[TraceRow] = field(default_factory=list)
    converged: bool = False

    @property
    def J(self) -> np.ndarray:
        return np.array([r.J for r in self.rows])

    @property
    def vi(self) -> np.ndarray:
        return np.array([r.vi_residual for r in self.rows])


def optimize(mesh, params, spec, init, cost: CostSpec, aset: AdmissibleSet,
             opt: OptimizerConfig = OptimizerConfig(), u0: np.ndarray | None = None,
             callback=None):
    """Minimize the reduced cost over the admissible set.

    Each iteration takes ``u+ = P(u - s g)`` and backtracks ``s`` until
    ``j(u+) <= j(u) + sigma <g, u+ - u>``.  The first trial step is the
    Barzilai-Borwein quotient ``<du, du> / <du, dg>`` of the last two iterates
    (``opt.bb_steps``, clamped to ``[min_step, max_step]``) or otherwise the
    previous accepted step enlarged by ``1/shrink``.  Stops when the projected-gradient
    residual drops below ``opt.vi_tol`` or after ``opt.max_iter`` iterations.

    ``callback(row, u)`` is called once per iterate.  Returns ``(u, trace)``;
    ``trace.rows[i]`` describes iterate ``i`` and the step that produced it
    (``step = 0`` for the starting point).
    """
    dt = params.dt
    u = aset.midpoint() if u0 is None else np.asarray(u0, dtype=float)
    u = project_admissible(mesh, dt, u, aset, opt.max_sweeps)
    trace = OptimizationTrace()

    def evaluate(v):
        st = solve_state(mesh, params, spec, init, v, adaptive=False)
        return st, cost_eval(st, v, cost)

    state, parts = evaluate(u)
    step = 0.0
    s = opt.s0
    prev = None
    for it in range(opt.max_iter + 1):
        g = solve_adjoint(state, cost).gradient
        if prev is not None and opt.bb_steps:
            du, dg = u - prev[0], g - prev[1]
            curv = sigma_inner(mesh, dt, du, dg)
            if curv > 0:
                s = float(np.clip(sigma_inner(mesh, dt, du, du) / curv, opt.min_step, opt.max_step))
        vi = vi_residual(mesh, dt, u, g, aset)
        trace.rows.append(_row(it, parts, vi, step, u, aset, mesh, dt))
        if callback is not None:
            callback(trace.rows[-1], u)
        log.info("iter %d  J=%.10e  vi=%.3e  step=%.3e", it, parts.total, vi, step)
        if vi <= opt.vi_tol:
            trace.converged = True
            break
        if it == opt.max_iter:
            break
        J = parts.total
        while True:
            trial = project_admissible(mesh, dt, u - s * g, aset, opt.max_sweeps)
            decrease = sigma_inner(mesh, dt, g, trial - u)
            t_state, t_parts = evaluate(trial)
            if decrease < 0 and t_parts.total <= J + opt.sigma * decrease:
                break
            s *= opt.shrink
            if s < opt.min_step:
                raise LineSearchFail(it, s, trace)
        prev = (u, g)
        u, state, parts, step = trial, t_state, t_parts, s
        s = min(s / opt.shrink, opt.max_step)
    return u, trace


def _row(it, parts: CostBreakdown, vi, step, u, aset, mesh, dt) -> TraceRow:
    return TraceRow(it, parts.total, parts.terminal, parts.control, parts.tracking, vi, step,
                    active_fraction(u, aset), rate_active(mesh, dt, u, aset))
