"""Structured vertex-centred meshes on intervals and rectangles.

The discrete operators are the lumped-mass / stiffness pairing of piecewise
linear elements on a uniform grid.  Domain quadrature is the (product)
trapezoid rule, so the stiffness matrix ``K`` is symmetric and

    <-Delta_h u, v>_w = u^T K v + sum_Gamma w_G alpha u v

holds exactly for the Robin closure.  In 2D the stiffness is assembled as
``Kx (x) My + Mx (x) Ky`` with lumped 1D masses, which reproduces the
five-point stencil in the interior.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class SpatialMesh:
    dimension: int
    extents: tuple[float, ...]
    node_counts: tuple[int, ...]

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (n - 1) for L, n in zip(self.extents, self.node_counts))

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_counts))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(0.0, L, n) for L, n in zip(self.extents, self.node_counts))

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``(n_nodes, dimension)``; x varies slowest."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def _axis_weights(self) -> tuple[np.ndarray, ...]:
        out = []
        for h, n in zip(self.spacing, self.node_counts):
            w = np.full(n, h)
            w[0] = w[-1] = 0.5 * h
            out.append(w)
        return tuple(out)

    @cached_property
    def domain_weights(self) -> np.ndarray:
        if self.dimension == 1:
            return self._axis_weights[0].copy()
        wx, wy = self._axis_weights
        return np.outer(wx, wy).ravel()

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        if self.dimension == 1:
            return np.array([0, self.node_counts[0] - 1])
        nx, ny = self.node_counts
        ij = np.indices((nx, ny)).reshape(2, -1).T
        on_edge = (ij[:, 0] == 0) | (ij[:, 0] == nx - 1) | (ij[:, 1] == 0) | (ij[:, 1] == ny - 1)
        return np.flatnonzero(on_edge)

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @cached_property
    def boundary_weights(self) -> np.ndarray:
        """Trapezoid weights along Gamma; corners collect half an edge cell from each side."""
        if self.dimension == 1:
            return np.ones(2)
        nx, ny = self.node_counts
        wx, wy = self._axis_weights
        w = np.zeros((nx, ny))
        # edges x = 0 and x = Lx integrate along y, edges y = 0 and y = Ly along x
        w[0, :] += wy
        w[-1, :] += wy
        w[:, 0] += wx
        w[:, -1] += wx
        return w.ravel()[self.boundary_nodes]

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_nodes)

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Symmetric stiffness matrix with homogeneous Neumann closure."""
        ks = [_stiffness_1d(n, h) for n, h in zip(self.node_counts, self.spacing)]
        if self.dimension == 1:
            return ks[0].tocsr()
        mx, my = (sp.diags(w) for w in self._axis_weights)
        return (sp.kron(ks[0], my) + sp.kron(mx, ks[1])).tocsr()

    @cached_property
    def boundary_mass(self) -> np.ndarray:
        """Boundary quadrature weights scattered to a full node vector (zero in the interior)."""
        out = np.zeros(self.n_nodes)
        out[self.boundary_nodes] = self.boundary_weights
        return out

    def measure(self) -> float:
        return float(np.prod(self.extents))

    def perimeter(self) -> float:
        if self.dimension == 1:
            return 2.0
        return 2.0 * sum(self.extents)

    def scatter(self, bvalues: np.ndarray) -> np.ndarray:
        """Lift a boundary field to a node vector, zero in the interior."""
        out = np.zeros(self.n_nodes)
        out[self.boundary_nodes] = bvalues
        return out

    def trace(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values)[..., self.boundary_nodes]


def _stiffness_1d(n: int, h: float) -> sp.spmatrix:
    main = np.full(n, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(n - 1, -1.0 / h)
    return sp.diags([off, main, off], [-1, 0, 1])


def build_mesh(dimension: int, extents: Sequence[float] | float,
               node_counts: Sequence[int] | int) -> SpatialMesh:
    """Build a uniform vertex-centred mesh on ``[0, L1]`` or ``[0, L1] x [0, L2]``."""
    if dimension not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dimension}")
    if np.isscalar(extents):
        extents = (float(extents),) * dimension
    if np.isscalar(node_counts):
        node_counts = (int(node_counts),) * dimension
    extents = tuple(float(e) for e in extents)
    node_counts = tuple(int(n) for n in node_counts)
    if len(extents) != dimension or len(node_counts) != dimension:
        raise ValueError("extents and node_counts must have one entry per axis")
    if any(n < 3 for n in node_counts):
        raise ValueError(f"need at least 3 nodes per axis, got {node_counts}")
    if any(not np.isfinite(e) or e <= 0 for e in extents):
        raise ValueError(f"extents must be positive, got {extents}")
    return SpatialMesh(dimension, extents, node_counts)


@dataclass(frozen=True)
class BcSpec:
    """Boundary closure for the diffusion operator.

    ``kind`` is ``"neumann"`` (homogeneous) or ``"robin"``, in which case the
    flux is ``alpha * mu - g`` on each boundary node (``g`` plays ``alpha * u``).
    """

    kind: str = "neumann"
    alpha: np.ndarray | None = None
    g: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("neumann", "robin"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "robin":
            if self.alpha is None:
                raise ValueError("robin closure requires alpha")
            if np.min(self.alpha) <= 0:
                raise ValueError("robin closure requires min(alpha) > 0")

    @classmethod
    def robin(cls, alpha, g=None) -> "BcSpec":
        alpha = np.asarray(alpha, dtype=float)
        g = np.zeros_like(alpha) if g is None else np.asarray(g, dtype=float)
        return cls("robin", alpha, g)


NEUMANN = BcSpec()


def robin_matrix(mesh: SpatialMesh, alpha: np.ndarray) -> sp.csr_matrix:
    """Stiffness plus the boundary mass term ``w_G * alpha`` on the diagonal."""
    return (mesh.stiffness + sp.diags(mesh.scatter(mesh.boundary_weights * alpha))).tocsr()


def apply_laplacian(mesh: SpatialMesh, field: np.ndarray, bc: BcSpec = NEUMANN) -> np.ndarray:
    """Action of ``-Delta_h`` with the boundary closure folded in.

    Returns the nodal field ``M^{-1} (K f + B alpha f - B g)`` where ``M`` holds the
    domain weights and ``B`` the boundary weights.
    """
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_nodes,):
        raise ValueError(f"field has shape {field.shape}, mesh has {mesh.n_nodes} nodes")
    out = mesh.stiffness @ field
    if bc.kind == "robin":
        wg = mesh.boundary_weights
        out[mesh.boundary_nodes] += wg * (bc.alpha * field[mesh.boundary_nodes] - bc.g)
    return out / mesh.domain_weights


def integrate_domain(mesh: SpatialMesh, field: np.ndarray) -> float:
    field = np.asarray(field, dtype=float)
    if field.shape[-1] != mesh.n_nodes:
        raise ValueError("field size does not match mesh")
    return float(field @ mesh.domain_weights)


def integrate_boundary(mesh: SpatialMesh, bfield: np.ndarray) -> float:
    bfield = np.asarray(bfield, dtype=float)
    if bfield.shape[-1] != mesh.n_boundary:
        raise ValueError("boundary field size does not match mesh")
    return float(bfield @ mesh.boundary_weights)


@dataclass(frozen=True)
class Norms:
    l2: float
    h1_semi: float
    linf: float

    def __iter__(self):
        return iter((self.l2, self.h1_semi, self.linf))

    @property
    def h1(self) -> float:
        return float(np.hypot(self.l2, self.h1_semi))


def l2_sq(mesh: SpatialMesh, field: np.ndarray) -> float:
    return float(mesh.domain_weights @ (np.asarray(field) ** 2))


def h1_semi_sq(mesh: SpatialMesh, field: np.ndarray) -> float:
    field = np.asarray(field, dtype=float)
    return max(float(field @ (mesh.stiffness @ field)), 0.0)


def boundary_l2_sq(mesh: SpatialMesh, bfield: np.ndarray) -> float:
    return float(mesh.boundary_weights @ (np.asarray(bfield) ** 2))


def norms(mesh: SpatialMesh, field: np.ndarray) -> Norms:
    """L2 norm, H1 seminorm (cell differences, i.e. ``sqrt(f^T K f)``) and max norm."""
    field = np.asarray(field, dtype=float)
    return Norms(
        l2=float(np.sqrt(l2_sq(mesh, field))),
        h1_semi=float(np.sqrt(h1_semi_sq(mesh, field))),
        linf=float(np.max(np.abs(field))) if field.size else 0.0,
    )
