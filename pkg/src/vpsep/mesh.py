"""Uniform right-triangle mesh of an axis-aligned rectangle.

Every grid cell of an nx-by-ny partition of [0, Lx] x [0, Ly] is split
along its lower-left to upper-right diagonal into two triangles. Nodes
are numbered row-major with x fastest; elements cell-major with the
lower triangle first. The structured layout gives constant-time point
location, which the characteristic transport step relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Immutable triangulation of a rectangle.

    Attributes
    ----------
    nx, ny : int
        Cell counts per axis.
    Lx, Ly : float
        Domain side lengths.
    nodes : ndarray, shape (n_nodes, 2)
        Vertex coordinates, row-major with x fastest.
    elements : ndarray, shape (2*nx*ny, 3)
        Node-index triples, counterclockwise. Cell-major, lower
        triangle first.
    boundary_nodes : ndarray
        Sorted indices of nodes on the domain boundary.
    """

    nx: int
    ny: int
    Lx: float
    Ly: float
    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def element_area(self) -> float:
        """Common area of every triangle, (Lx/nx)(Ly/ny)/2."""
        return 0.5 * self.hx * self.hy

    @property
    def diameter(self) -> float:
        """Longest edge of any element (the cell diagonal)."""
        return float(np.hypot(self.hx, self.hy))

    def element_grads(self) -> np.ndarray:
        """Barycentric gradients for all elements, shape (n_elements, 3, 2).

        Cached; there are only two triangle orientations on this mesh, so
        the array is two stacked constant blocks.
        """
        if "grads" not in self._cache:
            g = np.empty((self.n_elements, 3, 2))
            g[0::2] = _tri_grads(self.nodes[self.elements[0]])
            g[1::2] = _tri_grads(self.nodes[self.elements[1]])
            g.setflags(write=False)
            self._cache["grads"] = g
        return self._cache["grads"]


def _tri_grads(pts: np.ndarray) -> np.ndarray:
    """Gradients of the three barycentric functions of one triangle."""
    (x0, y0), (x1, y1), (x2, y2) = pts
    a2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)  # twice signed area
    return np.array([
        [y1 - y2, x2 - x1],
        [y2 - y0, x0 - x2],
        [y0 - y1, x1 - x0],
    ]) / a2


@dataclass(frozen=True)
class ElementGeometry:
    """Area and barycentric gradients of a single element."""

    area: float
    grad_bary: np.ndarray  # shape (3, 2)


def build_rect_mesh(nx: int, ny: int, Lx: float, Ly: float) -> Mesh:
    """Triangulate [0, Lx] x [0, Ly] into 2*nx*ny right triangles.

    Parameters
    ----------
    nx, ny : int
        Number of cells along x and y, at least 1.
    Lx, Ly : float
        Positive side lengths.

    Returns
    -------
    Mesh

    Raises
    ------
    ValueError
        On non-positive counts or lengths.
    """
    if not (isinstance(nx, (int, np.integer)) and isinstance(ny, (int, np.integer))):
        raise ValueError("cell counts must be integers")
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    if not (Lx > 0 and Ly > 0):
        raise ValueError(f"side lengths must be positive, got Lx={Lx}, Ly={Ly}")

    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # row-major, x fastest
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    # Cell (i, j) has corners ll, lr, ur, ul. The diagonal runs ll-ur;
    # the lower triangle (ll, lr, ur) comes first, then (ll, ur, ul).
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii = ii.ravel()
    jj = jj.ravel()
    ll = jj * (nx + 1) + ii
    lr = ll + 1
    ul = ll + (nx + 1)
    ur = ul + 1

    elements = np.empty((2 * nx * ny, 3), dtype=np.int64)
    elements[0::2, 0] = ll
    elements[0::2, 1] = lr
    elements[0::2, 2] = ur
    elements[1::2, 0] = ll
    elements[1::2, 1] = ur
    elements[1::2, 2] = ul

    gi = np.tile(np.arange(nx + 1), ny + 1)
    gj = np.repeat(np.arange(ny + 1), nx + 1)
    on_bdry = (gi == 0) | (gi == nx) | (gj == 0) | (gj == ny)
    boundary = np.flatnonzero(on_bdry)

    nodes.setflags(write=False)
    elements.setflags(write=False)
    boundary.setflags(write=False)
    return Mesh(int(nx), int(ny), float(Lx), float(Ly), nodes, elements, boundary)


def element_geometry(mesh: Mesh, e: int) -> ElementGeometry:
    """Exact area and barycentric gradients of element ``e``.

    Raises
    ------
    IndexError
        If ``e`` is out of range.
    """
    if not (0 <= e < mesh.n_elements):
        raise IndexError(f"element index {e} out of range [0, {mesh.n_elements})")
    pts = mesh.nodes[mesh.elements[e]]
    (x0, y0), (x1, y1), (x2, y2) = pts
    a2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    return ElementGeometry(area=0.5 * a2, grad_bary=_tri_grads(pts))


def locate_points(mesh: Mesh, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized point location for an array of points, shape (n, 2).

    Returns element indices (n,) and barycentric coordinates (n, 3).
    Points must lie in the closed domain; callers clamp first. Points
    exactly on a cell diagonal go to the lower triangle.
    """
    pts = np.asarray(pts, dtype=float)
    x = pts[..., 0]
    y = pts[..., 1]
    eps = 1e-12 * max(mesh.Lx, mesh.Ly)
    if (x < -eps).any() or (x > mesh.Lx + eps).any() or (y < -eps).any() or (y > mesh.Ly + eps).any():
        raise ValueError("point outside the domain; clamp before locating")

    fx = x / mesh.hx
    fy = y / mesh.hy
    i = np.clip(fx.astype(np.int64), 0, mesh.nx - 1)
    j = np.clip(fy.astype(np.int64), 0, mesh.ny - 1)
    s = fx - i
    t = fy - j

    cell = j * mesh.nx + i
    lower = t <= s  # diagonal tie-break: lower triangle
    elems = 2 * cell + np.where(lower, 0, 1)

    lam = np.empty(pts.shape[:-1] + (3,))
    # lower triangle (ll, lr, ur): lam = (1-s, s-t, t)
    # upper triangle (ll, ur, ul): lam = (1-t, s, t-s)
    lam[..., 0] = np.where(lower, 1.0 - s, 1.0 - t)
    lam[..., 1] = np.where(lower, s - t, s)
    lam[..., 2] = np.where(lower, t, t - s)
    # rounding guard: clip tiny negatives, renormalize
    np.clip(lam, 0.0, 1.0, out=lam)
    lam /= lam.sum(axis=-1, keepdims=True)
    return elems, lam


def locate_point(mesh: Mesh, x) -> tuple[int, np.ndarray]:
    """Locate a single point: (element index, barycentric triple).

    Constant time: integer cell arithmetic plus one diagonal test.
    """
    elems, lam = locate_points(mesh, np.asarray(x, dtype=float)[None, :])
    return int(elems[0]), lam[0]
