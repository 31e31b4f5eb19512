"""Forward solver for the coupled (rho, mu) system with Robin boundary control.

Each time step is decoupled by a delay in the chemical potential::

    delta (r - rho^n)/dt - Delta_h r + f'(r) = mu_del           (Newton)
    (eps + 2 r) (m - mu^n)/dt + m (r - rho^n)/dt - Delta_h m = 0 (linear)
    dm/dn = alpha (u^{n+1} - m) on Gamma

where ``r = rho^{n+1}``, ``m = mu^{n+1}`` and ``mu_del = mu^{n+1-k}`` (or
``mu0`` while ``n + 1 <= k``).  Every system is assembled in mass-weighted
form so the matrices are symmetric; the tangent and adjoint modules reuse the
same assembly routines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import BarrierBreach, DiagonalLoss, NonConvergence, SolverError
from .grid import SpatialMesh, robin_matrix
from .potential import PotentialSpec, f_prime, f_second

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 50
    damping_min: float = 1.0 / 1024

    def __post_init__(self):
        if not (self.tol > 0 and self.max_iter >= 1 and 0 < self.damping_min <= 1):
            raise ValueError("newton: need tol > 0, max_iter >= 1, 0 < damping_min <= 1")


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    delta: float
    alpha: np.ndarray
    T: float
    N: int
    delay_k: int = 1
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    max_refinements: int = 4

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        object.__setattr__(self, "alpha", alpha)
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if not 1 <= self.delay_k <= self.N:
            raise ValueError(f"delay_k must lie in [1, N], got {self.delay_k}")
        if alpha.ndim != 1 or not np.all(np.isfinite(alpha)) or alpha.min() <= 0:
            raise ValueError("alpha must be a finite boundary field with min(alpha) > 0")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)

    def refined(self) -> "ModelParams":
        return replace(self, N=2 * self.N, delay_k=2 * self.delay_k)


@dataclass(frozen=True)
class InitialData:
    rho0: np.ndarray
    mu0: np.ndarray

    def __post_init__(self):
        rho0 = np.asarray(self.rho0, dtype=float)
        mu0 = np.asarray(self.mu0, dtype=float)
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "mu0", mu0)
        if not np.all((rho0 > 0) & (rho0 < 1)):
            raise ValueError("initial rho must lie strictly inside (0, 1)")
        if not np.all(np.isfinite(mu0)) or mu0.min() < 0:
            raise ValueError("initial mu must be finite and nonnegative")
        if rho0.shape != mu0.shape:
            raise ValueError("rho0 and mu0 must have the same shape")


def check_control(u: np.ndarray, mesh: SpatialMesh, N: int, nonnegative: bool = True) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (N + 1, mesh.n_boundary):
        raise ValueError(f"control has shape {u.shape}, expected {(N + 1, mesh.n_boundary)}")
    if not np.all(np.isfinite(u)):
        raise ValueError("control contains non-finite values")
    if nonnegative and u.min() < 0:
        raise ValueError("control must be nonnegative")
    return u


@dataclass(frozen=True)
class StateSolution:
    mesh: SpatialMesh
    params: ModelParams
    spec: PotentialSpec
    init: InitialData
    u: np.ndarray  # (N+1, n_boundary), the control actually used
    rho: np.ndarray  # (N+1, n_nodes)
    mu: np.ndarray
    newton_iters: np.ndarray  # (N,)
    newton_residuals: np.ndarray
    energy_residuals: np.ndarray
    refinements: int = 0

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def dt(self) -> float:
        return self.params.dt


def delay_lookup(history, n: int, k: int, mu0: np.ndarray) -> np.ndarray:
    """Delayed chemical potential entering the step ``n -> n+1``."""
    if n + 1 > k:
        return history[n + 1 - k]
    return mu0


# -- assembly shared with the tangent and adjoint solvers -------------------


def rho_jacobian(mesh: SpatialMesh, params: ModelParams, spec: PotentialSpec,
                 rho_new: np.ndarray) -> sp.csc_matrix:
    """Mass-weighted Jacobian ``delta/dt M + K + M f''(rho)`` of the rho step."""
    w = mesh.domain_weights
    diag = w * (params.delta / params.dt + f_second(spec, rho_new))
    return (mesh.stiffness + sp.diags(diag)).tocsc()


def mu_diagonal(params: ModelParams, rho_new: np.ndarray, rho_old: np.ndarray) -> np.ndarray:
    """Nodal coefficient ``eps + 2 rho^{n+1} + (rho^{n+1} - rho^n)`` of ``mu^{n+1}/dt``."""
    return params.epsilon + 3.0 * rho_new - rho_old


def mu_matrix(mesh: SpatialMesh, params: ModelParams, rho_new: np.ndarray,
              rho_old: np.ndarray) -> sp.csc_matrix:
    d = mu_diagonal(params, rho_new, rho_old)
    return (robin_matrix(mesh, params.alpha) + sp.diags(mesh.domain_weights * d / params.dt)).tocsc()


def is_m_matrix_pattern(A: sp.spmatrix) -> bool:
    """Positive diagonal, nonpositive off-diagonal, strictly positive row sums."""
    A = sp.csr_matrix(A)
    d = A.diagonal()
    off = A - sp.diags(d)
    return bool(d.min() > 0 and (off.data.size == 0 or off.data.max() <= 0)
                and np.asarray(A.sum(axis=1)).min() > 0)


# -- single steps ------------------------------------------------------------


def _weighted_norm(mesh: SpatialMesh, assembled: np.ndarray) -> float:
    # L2 norm of the nodal residual M^{-1} F
    w = mesh.domain_weights
    return float(np.sqrt(np.sum(assembled ** 2 / w)))


def step_rho(mesh: SpatialMesh, rho_old: np.ndarray, mu_del: np.ndarray,
             params: ModelParams, spec: PotentialSpec, step: int = 0,
             return_info: bool = False):
    """Implicit rho update by damped Newton, iterating from ``rho_old``.

    Each damped trial point is kept inside the barrier interval before ``f'`` is
    evaluated; the step is halved until the residual decreases.  Iteration stops
    at ``newton.tol`` or at the round-off resolution of the residual, whichever
    is larger.
    """
    w = mesh.domain_weights
    K = mesh.stiffness
    c_t = params.delta / params.dt
    guard = spec.barrier_guard
    cfg = params.newton

    def residual(r):
        return w * (c_t * (r - rho_old) + f_prime(spec, r) - mu_del) + K @ r

    def floor(r):
        # residual change caused by a one-ulp change of r; near the barrier
        # f'' is huge and this exceeds any fixed tolerance
        return 4.0 * _weighted_norm(mesh, w * f_second(spec, r) * np.spacing(r))

    r = np.array(rho_old, dtype=float)
    F = residual(r)
    res = _weighted_norm(mesh, F)
    it = 0
    while res > max(cfg.tol, floor(r)):
        if it >= cfg.max_iter:
            raise NonConvergence(step, it, res)
        J = rho_jacobian(mesh, params, spec, r)
        d = -splu(J).solve(F)
        lam = 1.0
        while True:
            trial = r + lam * d
            inside = np.all((trial > guard) & (trial < 1.0 - guard))
            if inside:
                F_trial = residual(trial)
                res_trial = _weighted_norm(mesh, F_trial)
                if res_trial < (1.0 - 1e-4 * lam) * res or res_trial <= cfg.tol:
                    break
            if lam <= cfg.damping_min:
                if not inside:
                    raise BarrierBreach(step, f"Newton iterate left (0, 1) at damping {lam:g}")
                break  # accept a non-decreasing damped step rather than stall
            lam *= 0.5
        r, F, res = trial, F_trial, res_trial
        it += 1
    # one undamped polish step pushes the error to round-off, which keeps
    # finite-difference checks of the discrete map clean
    if it:
        trial = r - splu(rho_jacobian(mesh, params, spec, r)).solve(F)
        if np.all((trial > guard) & (trial < 1.0 - guard)):
            r = trial
            res = _weighted_norm(mesh, residual(r))
    if return_info:
        return r, it, res
    return r


def step_mu(mesh: SpatialMesh, mu_old: np.ndarray, rho_new: np.ndarray, rho_old: np.ndarray,
            u_new: np.ndarray, params: ModelParams, step: int = 0) -> np.ndarray:
    """Linear implicit mu update with the Robin load ``alpha u^{n+1}``."""
    d = mu_diagonal(params, rho_new, rho_old)
    if d.min() <= 0:
        raise DiagonalLoss(step, float(d.min() / params.dt))
    w = mesh.domain_weights
    A = mu_matrix(mesh, params, rho_new, rho_old)
    rhs = w * (params.epsilon + 2.0 * rho_new) * mu_old / params.dt
    rhs[mesh.boundary_nodes] += mesh.boundary_weights * params.alpha * u_new
    return splu(A).solve(rhs)


def energy(mesh: SpatialMesh, params: ModelParams, rho: np.ndarray, mu: np.ndarray) -> float:
    return float(mesh.domain_weights @ ((0.5 * params.epsilon + rho) * mu * mu))


def energy_residual(mesh: SpatialMesh, params: ModelParams, rho_old, mu_old, rho_new, mu_new,
                    u_new) -> float:
    """Defect of the discrete energy balance obtained by testing the mu-equation with mu."""
    b = mesh.boundary_nodes
    wg = mesh.boundary_weights
    a = params.alpha
    diss = mu_new @ (mesh.stiffness @ mu_new) + wg @ (a * mu_new[b] ** 2)
    work = wg @ (a * u_new * mu_new[b])
    return (energy(mesh, params, rho_new, mu_new) - energy(mesh, params, rho_old, mu_old)
            + params.dt * (diss - work))


# -- full solve ----------------------------------------------------------------


def resample_control(u: np.ndarray, N_old: int, N_new: int, T: float) -> np.ndarray:
    t_old = np.linspace(0.0, T, N_old + 1)
    t_new = np.linspace(0.0, T, N_new + 1)
    return np.stack([np.interp(t_new, t_old, u[:, j]) for j in range(u.shape[1])], axis=1)


def _march(mesh, params, spec, init, u) -> StateSolution:
    N = params.N
    rho = np.empty((N + 1, mesh.n_nodes))
    mu = np.empty((N + 1, mesh.n_nodes))
    rho[0], mu[0] = init.rho0, init.mu0
    iters = np.zeros(N, dtype=int)
    resid = np.zeros(N)
    eres = np.zeros(N)
    for n in range(N):
        mu_del = delay_lookup(mu, n, params.delay_k, init.mu0)
        rho[n + 1], iters[n], resid[n] = step_rho(
            mesh, rho[n], mu_del, params, spec, step=n, return_info=True)
        mu[n + 1] = step_mu(mesh, mu[n], rho[n + 1], rho[n], u[n + 1], params, step=n)
        eres[n] = energy_residual(mesh, params, rho[n], mu[n], rho[n + 1], mu[n + 1], u[n + 1])
    return StateSolution(mesh, params, spec, init, u, rho, mu, iters, resid, eres)


def solve_state(mesh: SpatialMesh, params: ModelParams, spec: PotentialSpec, init: InitialData,
                u: np.ndarray, adaptive: bool = True, nonnegative: bool = True) -> StateSolution:
    """March the decoupled scheme from ``t = 0`` to ``T``.

    With ``adaptive=True`` a failed solve (lost diagonal, Newton failure or
    barrier breach) is restarted with ``N`` and ``delay_k`` doubled and the
    control linearly resampled in time, at most ``params.max_refinements``
    times; the exception finally raised carries the earlier failures as
    ``.history``.  Derivative computations use ``adaptive=False`` so the time grid
    never changes underneath them.
    """
    u = check_control(u, mesh, params.N, nonnegative=nonnegative)
    if init.rho0.shape != (mesh.n_nodes,):
        raise ValueError("initial data does not match the mesh")
    if params.alpha.shape != (mesh.n_boundary,):
        raise ValueError("alpha does not match the mesh boundary")
    attempts = params.max_refinements if adaptive else 0
    cur, cur_u = params, u
    history: list[str] = []
    for refinement in range(attempts + 1):
        try:
            sol = _march(mesh, cur, spec, init, cur_u)
            return replace(sol, refinements=refinement)
        except SolverError as exc:
            if refinement == attempts:
                # earlier failures, oldest first, for error reporting
                exc.history = history
                raise
            history.append(f"N={cur.N}: {exc}")
            log.warning("%s; restarting with N=%d", exc, 2 * cur.N)
            cur_u = resample_control(cur_u, cur.N, 2 * cur.N, cur.T)
            cur = cur.refined()
    raise AssertionError("unreachable")
