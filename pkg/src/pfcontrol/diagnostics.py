"""Empirical checks of boundedness, stability and delay convergence.

Continuous norms are replaced by their discrete counterparts on the mesh;
``W`` (and ``H^{3/2}``) use the surrogate ``||v||_W^2 = ||v||_V^2 + ||A_h v||^2``
with ``A_h`` the Neumann diffusion operator.  Estimates are checked as the
stability of ratios, never against explicit constants.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import DegenerateInput
from .grid import SpatialMesh, apply_laplacian, boundary_l2_sq, h1_semi_sq, l2_sq
from .potential import PotentialSpec, f_value
from .state import ModelParams, StateSolution, solve_state
from .timefields import q_norm, time_derivative

W_SURROGATE = "||v||_W^2 := ||v||_V^2 + ||A_h v||_L2^2 (A_h: Neumann -Delta_h)"


def _rows(fn, mesh, a):
    return np.array([fn(mesh, row) for row in a])


def h_sq(mesh, a):
    return _rows(l2_sq, mesh, a)


def v_sq(mesh, a):
    return h_sq(mesh, a) + _rows(h1_semi_sq, mesh, a)


def w_sq(mesh, a):
    lap = _rows(lambda m, r: l2_sq(m, apply_laplacian(m, r)), mesh, a)
    return v_sq(mesh, a) + lap


def _tsum(dt, vals):
    # right-endpoint time integral of a per-step sequence
    return float(dt * np.sum(vals[1:]))


@dataclass(frozen=True)
class StabilityReport:
    lhs1: float
    rhs1: float
    lhs2: float
    rhs2: float
    rhs2_no_u0: float
    w_surrogate: str = W_SURROGATE

    @property
    def ratio1(self) -> float:
        return self.lhs1 / self.rhs1 if self.rhs1 > 0 else float("nan")

    @property
    def ratio2(self) -> float:
        return self.lhs2 / self.rhs2 if self.rhs2 > 0 else float("nan")

    @property
    def ratio2_no_u0(self) -> float:
        return self.lhs2 / self.rhs2_no_u0 if self.rhs2_no_u0 > 0 else float("nan")

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("w_surrogate")
        d.update(ratio1=self.ratio1, ratio2=self.ratio2, ratio2_no_u0=self.ratio2_no_u0)
        return d


def stability_from_states(s1: StateSolution, s2: StateSolution) -> StabilityReport:
    """Both sides of the two stability estimates for the difference of two solutions."""
    mesh, dt = s1.mesh, s1.dt
    rho = s1.rho - s2.rho
    mu = s1.mu - s2.mu
    u = s1.u - s2.u
    rho_t = time_derivative(rho, dt)
    mu_t = time_derivative(mu, dt)
    mu_v = v_sq(mesh, mu)
    rho_w = w_sq(mesh, rho)
    rho_t_w = w_sq(mesh, rho_t)

    lhs1 = (np.max(h_sq(mesh, mu) + v_sq(mesh, rho))
            + _tsum(dt, mu_v + h_sq(mesh, rho_t) + rho_w))
    lhs2 = (np.max(mu_v + v_sq(mesh, rho_t) + rho_w)
            + _tsum(dt, h_sq(mesh, mu_t) + rho_t_w))
    u_sq = np.array([boundary_l2_sq(mesh, row) for row in u])
    ut_sq = np.array([boundary_l2_sq(mesh, row) for row in time_derivative(u, dt)])
    rhs1 = _tsum(dt, u_sq)
    rhs2_no_u0 = _tsum(dt, u_sq + ut_sq)
    return StabilityReport(float(lhs1), rhs1, float(lhs2), rhs2_no_u0 + float(u_sq[0]), rhs2_no_u0)


def stability_experiment(mesh, params, spec, init, u1, u2) -> StabilityReport:
    """Solve for both controls and compare.  Identical controls raise
    :class:`DegenerateInput` with the (all-zero) report attached as ``.report``."""
    s1 = solve_state(mesh, params, spec, init, u1)
    s2 = solve_state(mesh, params, spec, init, u2)
    report = stability_from_states(s1, s2)
    if np.array_equal(np.asarray(u1), np.asarray(u2)):
        exc = DegenerateInput("u1 == u2: ratios undefined, difference norms reported")
        exc.report = report
        raise exc
    return report


@dataclass(frozen=True)
class BoundsReport:
    phi0: float
    sup_mu: float
    min_rho: float
    max_rho: float
    min_mu: float

    @property
    def sup_mu_ratio(self) -> float:
        return self.sup_mu / self.phi0

    @property
    def holds(self) -> bool:
        return bool(np.isfinite(self.sup_mu) and 0.0 < self.min_rho and self.max_rho < 1.0)


def boundedness_check(solution: StateSolution) -> BoundsReport:
    """``Phi0 = max(1, ||mu0||_inf, ||u||_inf)`` against the extrema over the space-time grid."""
    phi0 = max(1.0, float(np.abs(solution.init.mu0).max()), float(np.abs(solution.u).max()))
    return BoundsReport(phi0, float(solution.mu.max()), float(solution.rho.min()),
                        float(solution.rho.max()), float(solution.mu.min()))


def q_distance(a: StateSolution, b: StateSolution) -> float:
    """L2(Q) distance of two solutions on the same grid, both components."""
    return float(np.hypot(q_norm(a.mesh, a.dt, a.rho - b.rho), q_norm(a.mesh, a.dt, a.mu - b.mu)))


@dataclass(frozen=True)
class DelayRow:
    k: int
    tau: float
    distance: float
    order: float


def delay_convergence_study(mesh, params: ModelParams, spec, init, u, k_list) -> list[DelayRow]:
    """Distances to the smallest-delay solution at fixed ``dt``.

    The observed order compares successive rows against the delay offsets
    ``(k - k_ref) dt``; a first-order scheme gives order close to one.
    """
    ks = sorted(set(int(k) for k in k_list))
    if ks[-1] > params.N:
        raise ValueError("delay multipliers must not exceed N")
    ref = solve_state(mesh, replace(params, delay_k=ks[0]), spec, init, u, adaptive=False)
    rows = []
    prev = None
    for k in ks:
        sol = ref if k == ks[0] else solve_state(mesh, replace(params, delay_k=k), spec, init, u,
                                                  adaptive=False)
        d = q_distance(sol, ref)
        order = float("nan")
        if prev is not None and prev[1] > 0 and d > 0:
            order = float(np.log(d / prev[1]) / np.log((k - ks[0]) / (prev[0] - ks[0])))
        rows.append(DelayRow(k, k * params.dt, d, order))
        if k != ks[0]:
            prev = (k, d)
    return rows


def delay_gap(mesh, params: ModelParams, spec, init, control, N: int, k_pair=(1, 2)) -> float:
    """L2(Q) distance between the solutions with delays ``k_pair`` at ``N`` steps.

    ``control`` maps the time grid (length ``N+1``) to a boundary-time array.
    """
    base = replace(params, N=N, delay_k=1)
    u = control(base.times)
    a = solve_state(mesh, replace(base, delay_k=k_pair[0]), spec, init, u, adaptive=False)
    b = solve_state(mesh, replace(base, delay_k=k_pair[1]), spec, init, u, adaptive=False)
    return q_distance(a, b)


def norm_table(mesh: SpatialMesh, dt: float, rho: np.ndarray, mu: np.ndarray,
               spec: PotentialSpec | None = None) -> dict[str, float]:
    """Discrete values of the a priori energy norms of the solution.

    Potential terms (``f(rho)``, ``f1'(rho)``) are included only when ``spec``
    is given.  Returned in a fixed key order.
    """
    rho_t = time_derivative(rho, dt)
    mu_t = time_derivative(mu, dt)
    t = {}
    t["mu_Linf_H"] = np.sqrt(h_sq(mesh, mu).max())
    t["mu_L2_V"] = np.sqrt(_tsum(dt, v_sq(mesh, mu)))
    t["rho_t_L2_H"] = np.sqrt(_tsum(dt, h_sq(mesh, rho_t)))
    t["rho_Linf_V"] = np.sqrt(v_sq(mesh, rho).max())
    t["rho_L2_W"] = np.sqrt(_tsum(dt, w_sq(mesh, rho)))
    t["rho_t_Linf_H"] = np.sqrt(h_sq(mesh, rho_t).max())
    t["rho_t_L2_V"] = np.sqrt(_tsum(dt, v_sq(mesh, rho_t)))
    t["rho_t_Linf_W"] = np.sqrt(w_sq(mesh, rho_t).max())
    t["mu_t_L2_H"] = np.sqrt(_tsum(dt, h_sq(mesh, mu_t)))
    t["mu_Linf_V"] = np.sqrt(v_sq(mesh, mu).max())
    t["mu_L2_H32"] = np.sqrt(_tsum(dt, w_sq(mesh, mu)))
    if spec is not None:
        f = np.array([f_value(spec, row) for row in rho])
        f1p = spec.c * (np.log(rho) - np.log1p(-rho))
        t["f_Linf_L1"] = np.max(np.abs(f) @ mesh.domain_weights)
        t["f1p_L2_Q"] = np.sqrt(_tsum(dt, h_sq(mesh, f1p)))
        t["f1p_Linf_H"] = np.sqrt(h_sq(mesh, f1p).max())
    return {k: float(v) for k, v in t.items()}


def solution_norm_table(solution: StateSolution) -> dict[str, float]:
    return norm_table(solution.mesh, solution.dt, solution.rho, solution.mu, solution.spec)
