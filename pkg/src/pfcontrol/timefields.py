"""Space-time quadrature on Q and Sigma.

Arrays are shaped ``(N + 1, n)`` with row ``n`` at ``t_n = n dt``.  Time
integrals use the right-endpoint rule ``sum_{n=1}^N dt * (...)^n``, matching
the implicit stepping; time derivatives are backward differences.
"""

from __future__ import annotations

import numpy as np

from .grid import SpatialMesh


def sigma_inner(mesh: SpatialMesh, dt: float, a: np.ndarray, b: np.ndarray) -> float:
    """``int_0^T int_Gamma a b`` for boundary-time arrays."""
    return float(dt * np.sum((a[1:] * b[1:]) @ mesh.boundary_weights))


def sigma_norm(mesh: SpatialMesh, dt: float, a: np.ndarray) -> float:
    return float(np.sqrt(max(sigma_inner(mesh, dt, a, a), 0.0)))


def q_inner(mesh: SpatialMesh, dt: float, a: np.ndarray, b: np.ndarray) -> float:
    """``int_0^T int_Omega a b`` for node-time arrays."""
    return float(dt * np.sum((a[1:] * b[1:]) @ mesh.domain_weights))


def q_norm(mesh: SpatialMesh, dt: float, a: np.ndarray) -> float:
    return float(np.sqrt(max(q_inner(mesh, dt, a, a), 0.0)))


def time_derivative(a: np.ndarray, dt: float) -> np.ndarray:
    """Backward differences; row 0 is zero."""
    out = np.zeros_like(a, dtype=float)
    out[1:] = np.diff(a, axis=0) / dt
    return out


def rate_norm(mesh: SpatialMesh, dt: float, v: np.ndarray) -> float:
    """Discrete ``||v_t||_{L2(0,T;L2(Gamma))}`` from forward differences."""
    return sigma_norm(mesh, dt, time_derivative(v, dt))


def h1_time_norm(mesh: SpatialMesh, dt: float, v: np.ndarray) -> float:
    """Discrete ``||v||_{H1(0,T;L2(Gamma))}``."""
    return float(np.hypot(sigma_norm(mesh, dt, v), rate_norm(mesh, dt, v)))
