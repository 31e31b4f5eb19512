"""Logarithmic double-well free energy ``f = f1 + f2`` and its derivatives.

``f1(r) = c (r log r + (1 - r) log(1 - r))`` is convex and singular at the
endpoints of (0, 1); ``f2`` is a polynomial of degree at most four.  All
functions accept scalars or arrays and raise :class:`DomainError` when an
argument lies outside ``[guard, 1 - guard]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError


@dataclass(frozen=True)
class PotentialSpec:
    c: float = 1.0
    f2_coeffs: tuple[float, ...] = (0.0,)  # ascending powers of rho
    barrier_guard: float = 1e-12

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"potential.c must be positive, got {self.c}")
        coeffs = tuple(float(a) for a in self.f2_coeffs)
        if len(coeffs) > 5:
            raise ValueError("f2 must have degree at most 4")
        if not all(np.isfinite(coeffs)):
            raise ValueError("f2 coefficients must be finite")
        object.__setattr__(self, "f2_coeffs", coeffs)
        if not 0 < self.barrier_guard < 0.5:
            raise ValueError("barrier_guard must lie in (0, 0.5)")

    @classmethod
    def double_well(cls, c: float = 1.0, c2: float = 0.0, barrier_guard: float = 1e-12):
        """``f2(r) = c2 r (1 - r)``."""
        return cls(c=c, f2_coeffs=(0.0, c2, -c2), barrier_guard=barrier_guard)

    @property
    def f2(self) -> Polynomial:
        return Polynomial(self.f2_coeffs)

    def f2_derivative(self, order: int) -> Polynomial:
        return self.f2.deriv(order)


def _checked(spec: PotentialSpec, rho):
    r = np.asarray(rho, dtype=float)
    g = spec.barrier_guard
    bad = ~((r >= g) & (r <= 1.0 - g))
    if np.any(bad):
        raise DomainError(float(r[bad].flat[0]) if r.ndim else float(r), g)
    return r


def _ret(x):
    return float(x) if np.ndim(x) == 0 else x


def f_value(spec: PotentialSpec, rho):
    r = _checked(spec, rho)
    f1 = spec.c * (r * np.log(r) + (1.0 - r) * np.log1p(-r))
    return _ret(f1 + spec.f2(r))


def f_prime(spec: PotentialSpec, rho):
    r = _checked(spec, rho)
    return _ret(spec.c * (np.log(r) - np.log1p(-r)) + spec.f2_derivative(1)(r))


def f1_second(spec: PotentialSpec, rho):
    r = _checked(spec, rho)
    return _ret(spec.c / (r * (1.0 - r)))


def f_second(spec: PotentialSpec, rho):
    r = _checked(spec, rho)
    return _ret(spec.c / (r * (1.0 - r)) + spec.f2_derivative(2)(r))


def f_third(spec: PotentialSpec, rho):
    r = _checked(spec, rho)
    s = r * (1.0 - r)
    return _ret(spec.c * (2.0 * r - 1.0) / (s * s) + spec.f2_derivative(3)(r))
