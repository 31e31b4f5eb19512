"""CSV persistence with lossless ``.17g`` decimals and no timestamps."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeMismatch
from .grid import SpatialMesh
from .state import StateSolution


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        return [], []
    return rows[0], rows[1:]


def write_state_csv(path, sol: StateSolution) -> Path:
    """One row per (step, node): ``step, time, node_index, rho, mu``."""
    times = sol.params.times
    n = sol.mesh.n_nodes

    def rows():
        for s in range(sol.N + 1):
            for i in range(n):
                yield s, times[s], i, sol.rho[s, i], sol.mu[s, i]

    return write_rows(path, ["step", "time", "node_index", "rho", "mu"], rows())


def write_diagnostics_csv(path, sol: StateSolution) -> Path:
    """Per-step Newton work, energy-identity residual and field extrema (step 0 has no solve)."""
    def rows():
        for s in range(sol.N + 1):
            it = sol.newton_iters[s - 1] if s > 0 else 0
            er = sol.energy_residuals[s - 1] if s > 0 else 0.0
            yield (s, it, er, sol.rho[s].min(), sol.rho[s].max(), sol.mu[s].min(), sol.mu[s].max())

    return write_rows(path, ["step", "newton_iters", "energy_residual", "min_rho", "max_rho",
                             "min_mu", "max_mu"], rows())


def write_trajectory_csv(path, u: np.ndarray, mesh: SpatialMesh, times: np.ndarray) -> Path:
    """Boundary-time array as ``step, time, boundary_node, u`` (``boundary_node`` is the
    ordinal within the boundary, not the global node index)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (len(times), mesh.n_boundary):
        raise ShapeMismatch("control", (len(times), mesh.n_boundary), u.shape)

    def rows():
        for s in range(u.shape[0]):
            for b in range(u.shape[1]):
                yield s, times[s], b, u[s, b]

    return write_rows(path, ["step", "time", "boundary_node", "u"], rows())


def read_control_csv(path, mesh: SpatialMesh, N: int) -> np.ndarray:
    """Inverse of :func:`write_trajectory_csv`; checks that every (step, node) pair appears once."""
    header, rows = read_rows(path)
    expected = (N + 1) * mesh.n_boundary
    if not rows:
        raise ShapeMismatch("control rows", expected, 0)
    try:
        cols = [header.index(c) for c in ("step", "boundary_node", "u")]
    except ValueError:
        raise ShapeMismatch("control columns", "step, boundary_node, u", ", ".join(header)) from None
    if len(rows) != expected:
        raise ShapeMismatch("control rows", expected, len(rows))
    out = np.full((N + 1, mesh.n_boundary), np.nan)
    for r in rows:
        s, b = int(r[cols[0]]), int(r[cols[1]])
        if not (0 <= s <= N and 0 <= b < mesh.n_boundary):
            raise ShapeMismatch("control index", f"step <= {N}, node < {mesh.n_boundary}",
                                f"step {s}, node {b}")
        out[s, b] = float(r[cols[2]])
    if np.isnan(out).any():
        raise ShapeMismatch("control entries", expected, int((~np.isnan(out)).sum()))
    return out
