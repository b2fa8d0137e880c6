"""Nodal P1 fields: containers, interpolation, quadrature, reductions.

Scalar fields store (N,) arrays over mesh nodes, velocity fields (N, 2),
symmetric tensor fields (N, 3) holding (C11, C12, C22). Integration uses
the 3-point edge-midpoint rule, exact for quadratic integrands; nonlinear
integrands are formed by interpolating the P1 data to the quadrature
points first and applying the nonlinearity there, so energy diagnostics
and assembled forms share one quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .mesh import Mesh

# P1 basis values at the three edge midpoints (rows: midpoints of edges 01, 12, 20)
QUAD = np.array([
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
])
QUAD.setflags(write=False)


def _check_len(values: np.ndarray, mesh: Mesh, ncomp: int, kind: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    expected = (mesh.n_nodes,) if ncomp == 1 else (mesh.n_nodes, ncomp)
    if values.shape != expected:
        raise ValueError(f"{kind} values must have shape {expected}, got {values.shape}")
    return values


@dataclass
class ScalarField:
    mesh: Mesh
    values: np.ndarray  # (N,)

    def __post_init__(self):
        self.values = _check_len(self.values, self.mesh, 1, "scalar")


@dataclass
class VectorField:
    mesh: Mesh
    values: np.ndarray  # (N, 2)

    def __post_init__(self):
        self.values = _check_len(self.values, self.mesh, 2, "vector")


@dataclass
class TensorField:
    """Symmetric 2x2 tensor per node, stored as (C11, C12, C22)."""

    mesh: Mesh
    values: np.ndarray  # (N, 3)

    def __post_init__(self):
        self.values = _check_len(self.values, self.mesh, 3, "tensor")


Field = Union[ScalarField, VectorField, TensorField]


@dataclass
class State:
    """All nodal unknowns at one time level."""

    t: float
    step: int
    phi: np.ndarray
    q: np.ndarray
    mu: np.ndarray
    u: np.ndarray  # (N, 2)
    p: np.ndarray
    C: np.ndarray  # (N, 3)

    def copy(self) -> "State":
        return State(self.t, self.step, self.phi.copy(), self.q.copy(),
                     self.mu.copy(), self.u.copy(), self.p.copy(), self.C.copy())


def eval_at(field: Field, e: int, bary) -> np.ndarray:
    """P1 interpolation of a field at barycentric coordinates inside element e."""
    lam = np.asarray(bary, dtype=float)
    nodal = field.values[field.mesh.elements[e]]
    out = np.tensordot(lam, nodal, axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def quad_coords(mesh: Mesh) -> np.ndarray:
    """Coordinates of the edge-midpoint quadrature points, (n_elements, 3, 2)."""
    if "quad_coords" not in mesh._cache:
        verts = mesh.nodes[mesh.elements]  # (n_e, 3, 2)
        qc = np.einsum("qk,ekd->eqd", QUAD, verts)
        qc.setflags(write=False)
        mesh._cache["quad_coords"] = qc
    return mesh._cache["quad_coords"]


def at_quad(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """Interpolate nodal values to the quadrature points.

    (N,) -> (n_elements, 3); (N, k) -> (n_elements, 3, k).
    """
    gathered = np.asarray(nodal)[mesh.elements]  # (n_e, 3 nodes, ...)
    return np.einsum("qk,ek...->eq...", QUAD, gathered)


def integrate(mesh: Mesh, f) -> float:
    """Integrate over the domain with the 3-point edge-midpoint rule.

    ``f`` is either a vectorized callable f(x, y) or a precomputed array
    of quadrature-point values with shape (n_elements, 3).
    """
    if callable(f):
        qc = quad_coords(mesh)
        vals = np.asarray(f(qc[..., 0], qc[..., 1]), dtype=float)
    else:
        vals = np.asarray(f, dtype=float)
    if vals.shape != (mesh.n_elements, 3):
        raise ValueError(f"integrand must evaluate to shape {(mesh.n_elements, 3)}, "
                         f"got {vals.shape}")
    return float(vals.sum() * (mesh.element_area / 3.0))


def integrate_nodal(mesh: Mesh, nodal: np.ndarray) -> float:
    """Integral of a P1 field given by nodal values (quadrature is exact)."""
    return integrate(mesh, at_quad(mesh, nodal))


def mean(field: Field, mesh: Mesh) -> float:
    """Domain average, integrate(field)/(Lx*Ly)."""
    vals = field.values if hasattr(field, "values") else np.asarray(field)
    return integrate_nodal(mesh, vals) / (mesh.Lx * mesh.Ly)


def minmax(field) -> tuple[float, float]:
    vals = field.values if hasattr(field, "values") else np.asarray(field)
    return float(vals.min()), float(vals.max())


def element_gradients(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """Piecewise-constant gradient of a P1 field.

    (N,) -> (n_elements, 2); (N, k) -> (n_elements, 2, k).
    """
    grads = mesh.element_grads()  # (n_e, 3, 2)
    gathered = np.asarray(nodal)[mesh.elements]
    return np.einsum("ekd,ek...->ed...", grads, gathered)


def make_initial_state(mesh: Mesh, ics, seed: int = 0) -> State:
    """Seeded initial state from an InitialConditionSpec."""
    rng = np.random.default_rng(seed)
    N = mesh.n_nodes
    phi = np.full(N, float(ics.phi_mean))
    if ics.noise_amp > 0:
        phi = phi + rng.uniform(-ics.noise_amp, ics.noise_amp, N)
    q = np.full(N, float(ics.q0))
    mu = np.zeros(N)
    if ics.u0 is not None:
        u = np.ascontiguousarray(ics.u0(mesh.nodes), dtype=float)
    else:
        u = np.zeros((N, 2))
    u[mesh.boundary_nodes] = 0.0  # no-slip walls
    p = np.zeros(N)
    C = np.tile(np.asarray(ics.C0, dtype=float), (N, 1))
    return State(t=0.0, step=0, phi=phi, q=q, mu=mu, u=u, p=p, C=C)
