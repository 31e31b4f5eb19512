"""Tracking-type cost functional and its pieces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import l2_sq
from .state import StateSolution
from .timefields import q_inner, sigma_inner


@dataclass(frozen=True)
class CostSpec:
    beta1: float
    beta2: float
    rho_T: np.ndarray  # (n_nodes,)
    mu_T: np.ndarray  # (N+1, n_nodes)

    def __post_init__(self):
        if not (self.beta1 >= 0 and self.beta2 >= 0):
            raise ValueError("beta1 and beta2 must be nonnegative")
        rho_T = np.asarray(self.rho_T, dtype=float)
        mu_T = np.asarray(self.mu_T, dtype=float)
        if not (np.all(np.isfinite(rho_T)) and np.all(np.isfinite(mu_T))):
            raise ValueError("targets must be finite")
        object.__setattr__(self, "rho_T", rho_T)
        object.__setattr__(self, "mu_T", mu_T)


@dataclass(frozen=True)
class CostBreakdown:
    terminal: float
    control: float
    tracking: float

    @property
    def total(self) -> float:
        return self.terminal + self.control + self.tracking


def cost_eval(state: StateSolution, u: np.ndarray, cost: CostSpec) -> CostBreakdown:
    """Terminal misfit, control energy and chemical-potential tracking terms."""
    mesh, dt = state.mesh, state.dt
    if cost.mu_T.shape != state.mu.shape:
        raise ValueError(f"mu_T has shape {cost.mu_T.shape}, expected {state.mu.shape}")
    dmu = state.mu - cost.mu_T
    return CostBreakdown(
        terminal=0.5 * l2_sq(mesh, state.rho[-1] - cost.rho_T),
        control=0.5 * cost.beta1 * sigma_inner(mesh, dt, u, u),
        tracking=0.5 * cost.beta2 * q_inner(mesh, dt, dmu, dmu),
    )
