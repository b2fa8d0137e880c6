"""First-order characteristic transport for the advective terms.

Each node traces one backward Euler step along the velocity field,
x_foot = x - u(x) dt, and transported fields are evaluated there by P1
interpolation. Feet are clamped componentwise to the closed domain:
with no-slip walls the exact characteristics cannot exit, so clamping
only absorbs discretization overshoot.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .mesh import Mesh, locate_points


@dataclass
class FootPoints:
    """Upstream foot of every node: coordinates plus (element, barycentric) location."""

    mesh: Mesh
    coords: np.ndarray  # (N, 2), inside the closed domain
    elems: np.ndarray   # (N,) element indices
    bary: np.ndarray    # (N, 3) barycentric coordinates


def compute_feet(mesh: Mesh, u, dt: float) -> FootPoints:
    """Backward-traced characteristic feet x - u(x) dt for all nodes."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = u.values if hasattr(u, "values") else np.asarray(u)
    coords = mesh.nodes - dt * u
    np.clip(coords[:, 0], 0.0, mesh.Lx, out=coords[:, 0])
    np.clip(coords[:, 1], 0.0, mesh.Ly, out=coords[:, 1])
    elems, bary = locate_points(mesh, coords)
    return FootPoints(mesh=mesh, coords=coords, elems=elems, bary=bary)


def transport(field, feet: FootPoints) -> np.ndarray:
    """Evaluate a nodal field at the foot points.

    Output node i carries field(foot_i), a convex combination of nodal
    values, so the result stays inside [min(field), max(field)].
    Accepts (N,) or (N, k) arrays and returns the same shape.
    """
    vals = field.values if hasattr(field, "values") else np.asarray(field)
    gathered = vals[feet.mesh.elements[feet.elems]]  # (N, 3, ...)
    return np.einsum("nk,nk...->n...", feet.bary, gathered)


def transport_many(feet: FootPoints, *arrays) -> tuple:
    """Transport several nodal arrays with one set of feet."""
    return tuple(transport(a, feet) for a in arrays)


def cfl_number(mesh: Mesh, u, dt: float) -> float:
    """max |u| dt / h, the characteristic displacement in cell units."""
    u = u.values if hasattr(u, "values") else np.asarray(u)
    speed = float(np.sqrt((u ** 2).sum(axis=1)).max())
    return speed * dt / min(mesh.hx, mesh.hy)
