"""Finite-element operator assembly on structured triangle meshes.

All bilinear forms are built from P1 element kernels with the shared
3-point edge-midpoint quadrature. Coefficient fields are given nodally,
interpolated P1, and evaluated at the quadrature points; products of
unknowns with coefficient fields use nodal interpolation of the product
(group treatment), which keeps paired coupling blocks exact transposes
of each other.

Degree-of-freedom layout used by the steppers:
    velocity   [ux (N), uy (N)]                -> 2N
    tensor     [C11 (N), C12 (N), C22 (N)]     -> 3N
The C12 equations are scaled by 1/2 relative to the raw symmetric-basis
pairing so all three tensor components share one scalar operator; the
velocity coupling block absorbs that scaling.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fields import QUAD, at_quad
from .mesh import Mesh
from .sparse import SparseMatrix

SYM_TOL = 1e-13


def assert_symmetric(A: sp.spmatrix, label: str = "matrix") -> None:
    """Guard used by every symmetric assembler."""
    scale = max(abs(A.max()), abs(A.min()), 1e-300)
    diff = abs(A - A.T)
    err = diff.max() if diff.nnz else 0.0
    if err > SYM_TOL * scale:
        raise AssertionError(f"{label} asymmetry {err:.3e} exceeds {SYM_TOL:.0e}*{scale:.3e}")


def _elem_data(mesh: Mesh):
    """Cached per-element arrays: node triples, gradients, COO index grids."""
    if "asm" not in mesh._cache:
        tri = mesh.elements
        n_e = mesh.n_elements
        grads = mesh.element_grads()  # (n_e, 3, 2)
        rows = np.broadcast_to(tri[:, :, None], (n_e, 3, 3)).ravel()
        cols = np.broadcast_to(tri[:, None, :], (n_e, 3, 3)).ravel()
        mesh._cache["asm"] = (tri, grads, rows, cols)
    return mesh._cache["asm"]


def _scatter(mesh: Mesh, vals: np.ndarray, row_off: int = 0, col_off: int = 0,
             shape=None) -> sp.csr_matrix:
    """Sum (n_e, 3, 3) element blocks into a CSR matrix."""
    _, _, rows, cols = _elem_data(mesh)
    N = mesh.n_nodes
    if shape is None:
        shape = (N, N)
    A = sp.coo_matrix((vals.ravel(), (rows + row_off, cols + col_off)), shape=shape)
    return A.tocsr()


def _mean_weight(mesh: Mesh, w) -> np.ndarray:
    """Per-element quadrature average of a nodal weight (exact for P1 data)."""
    if w is None:
        return np.ones(mesh.n_elements)
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        return np.full(mesh.n_elements, float(w))
    return w[mesh.elements].mean(axis=1)


def _unit_stiffness_blocks(mesh: Mesh) -> np.ndarray:
    """Element kernels grad(psi_k) . grad(psi_l) * area, cached."""
    if "k_unit" not in mesh._cache:
        _, grads, _, _ = _elem_data(mesh)
        mesh._cache["k_unit"] = np.einsum("ekd,eld->ekl", grads, grads) * mesh.element_area
    return mesh._cache["k_unit"]


def assemble_mass(mesh: Mesh) -> SparseMatrix:
    """Consistent P1 mass matrix (element diagonal area/6, off-diagonal area/12)."""
    a = mesh.element_area
    block = a / 12.0 * (np.ones((3, 3)) + np.eye(3))
    vals = np.broadcast_to(block, (mesh.n_elements, 3, 3))
    A = _scatter(mesh, vals)
    assert_symmetric(A, "mass")
    return SparseMatrix.from_scipy(A)


def assemble_stiffness(mesh: Mesh, w=None) -> SparseMatrix:
    """Weighted stiffness: entries of the form (w grad u, grad v).

    ``w`` is a nodal array (interpolated P1 and evaluated at quadrature),
    a scalar, or None for the unit weight.
    """
    vals = _unit_stiffness_blocks(mesh) * _mean_weight(mesh, w)[:, None, None]
    A = _scatter(mesh, vals)
    assert_symmetric(A, "stiffness")
    return SparseMatrix.from_scipy(A)


def _diag(vals: np.ndarray) -> sp.csr_matrix:
    return sp.diags(np.asarray(vals, dtype=float)).tocsr()


def assemble_A_coupled_stiffness(mesh: Mesh, A_nodal: np.ndarray) -> SparseMatrix:
    """Stiffness congruence-scaled by a nodal modulus: D_A K D_A.

    Realizes gradient pairings of nodally interpolated modulus products,
    so the result is symmetric PSD for any positive nodal modulus.
    """
    A_nodal = np.asarray(A_nodal, dtype=float)
    if np.any(A_nodal <= 0):
        raise ValueError("nodal modulus must be positive")
    K = assemble_stiffness(mesh).scipy()
    D = _diag(A_nodal)
    out = (D @ K @ D).tocsr()
    assert_symmetric(out, "coupled stiffness")
    return SparseMatrix.from_scipy(out)


def assemble_cross_coupling(mesh: Mesh, n_nodal, A_nodal) -> tuple[SparseMatrix, SparseMatrix]:
    """The two cross-diffusion blocks (K_n D_A, D_A K_n).

    K_n is the mobility-weighted stiffness; the blocks are exact
    transposes by construction, which is what makes their energy
    contributions cancel identically in the discrete balance.
    """
    Kn = assemble_stiffness(mesh, n_nodal).scipy()
    D = _diag(A_nodal)
    first = (Kn @ D).tocsr()
    second = (D @ Kn).tocsr()
    return SparseMatrix.from_scipy(first), SparseMatrix.from_scipy(second)


def assemble_weighted_mass(mesh: Mesh, w_quad: np.ndarray) -> SparseMatrix:
    """Mass matrix weighted by quadrature-point values w, (w u, v).

    ``w_quad`` has shape (n_elements, 3); pass at_quad(mesh, w_nodal)
    for nodal data, or any pointwise product formed at the quadrature
    points directly.
    """
    w_quad = np.asarray(w_quad, dtype=float)
    psi = np.einsum("qk,ql->qkl", QUAD, QUAD)  # basis products at each point
    vals = (mesh.element_area / 3.0) * np.einsum("eq,qkl->ekl", w_quad, psi)
    A = _scatter(mesh, vals)
    assert_symmetric(A, "weighted mass")
    return SparseMatrix.from_scipy(A)


def assemble_viscous(mesh: Mesh, eta_nodal, eliminate_boundary: bool = True) -> SparseMatrix:
    """Viscosity-weighted symmetric-gradient form on velocity pairs (2N x 2N).

    With the symmetric gradient D(u) = (grad u + grad u^T)/2 the element
    blocks are, per component pair,
        (x,x): Kxx + Kyy/2    (x,y): tensor of y-grad rows, x-grad cols / 2
        (y,y): Kyy + Kxx/2    (y,x): transpose of (x,y)
    all scaled by the element-averaged viscosity.
    """
    _, grads, _, _ = _elem_data(mesh)
    N = mesh.n_nodes
    a = mesh.element_area
    wbar = (_mean_weight(mesh, eta_nodal) * a)[:, None, None]
    gx, gy = grads[:, :, 0], grads[:, :, 1]
    kxx = np.einsum("ek,el->ekl", gx, gx)
    kyy = np.einsum("ek,el->ekl", gy, gy)
    kyx = np.einsum("ek,el->ekl", gy, gx)  # row grad-y, col grad-x
    b11 = wbar * (kxx + 0.5 * kyy)
    b22 = wbar * (kyy + 0.5 * kxx)
    b12 = wbar * 0.5 * kyx
    A = (_scatter(mesh, b11, 0, 0, (2 * N, 2 * N))
         + _scatter(mesh, b12, 0, N, (2 * N, 2 * N))
         + _scatter(mesh, b12.transpose(0, 2, 1), N, 0, (2 * N, 2 * N))
         + _scatter(mesh, b22, N, N, (2 * N, 2 * N))).tocsr()
    assert_symmetric(A, "viscous form")
    if eliminate_boundary:
        A = eliminate_rows_cols(A, velocity_boundary_dofs(mesh))
    return SparseMatrix.from_scipy(A)


def assemble_div(mesh: Mesh) -> SparseMatrix:
    """Divergence pairing (div u, psi): N x 2N, column blocks (ux, uy)."""
    _, grads, _, _ = _elem_data(mesh)
    N = mesh.n_nodes
    w = mesh.element_area / 3.0
    bx = np.broadcast_to(w * grads[:, None, :, 0], (mesh.n_elements, 3, 3))
    by = np.broadcast_to(w * grads[:, None, :, 1], (mesh.n_elements, 3, 3))
    B = (_scatter(mesh, bx, 0, 0, (N, 2 * N))
         + _scatter(mesh, by, 0, N, (N, 2 * N))).tocsr()
    return SparseMatrix.from_scipy(B)


def assemble_pressure_stab(mesh: Mesh, delta0: float) -> SparseMatrix:
    """Pressure-gradient stabilization: delta0 * h_K^2 * stiffness per element.

    h_K is the element diameter (the hypotenuse on this mesh family).
    """
    if delta0 < 0:
        raise ValueError("stabilization factor must be nonnegative")
    vals = (delta0 * mesh.diameter ** 2) * _unit_stiffness_blocks(mesh)
    A = _scatter(mesh, vals)
    assert_symmetric(A, "pressure stabilization")
    return SparseMatrix.from_scipy(A)


def _coeff_moments(mesh: Mesh, coeff_quad: np.ndarray) -> np.ndarray:
    """Per-element vectors V[i] = (area/3) sum_q psi_i(q) c(q), shape (n_e, 3)."""
    return (mesh.element_area / 3.0) * np.einsum("eq,qi->ei", coeff_quad, QUAD)


def assemble_step2_coupling(mesh: Mesh, C_tilde: np.ndarray) -> tuple[SparseMatrix, SparseMatrix]:
    """Conformation coupling blocks for the flow step.

    Returns (T_u, W):
      T_u (2N x 3N) sends tensor unknowns to momentum rows through the
      pairing of (trace of the unknown) * (lagged tensor) against grad v;
      the trace makes only the diagonal-component columns active.
      W (3N x 2N) sends velocity unknowns to tensor rows through the
      velocity-gradient/lagged-tensor product against the symmetric test
      basis, with the diagonal-component rows carrying factor 2 and the
      off-diagonal row rescaled by 1/2 (shared scalar operator layout).
    """
    C_tilde = np.asarray(C_tilde, dtype=float)
    _, grads, _, _ = _elem_data(mesh)
    N = mesh.n_nodes
    gx, gy = grads[:, :, 0], grads[:, :, 1]
    cq = at_quad(mesh, C_tilde)  # (n_e, 3, 3): quad point x (c11, c12, c22)
    V11 = _coeff_moments(mesh, cq[:, :, 0])
    V12 = _coeff_moments(mesh, cq[:, :, 1])
    V22 = _coeff_moments(mesh, cq[:, :, 2])

    def outer_gv(g, V):  # rows from gradients, cols from moments
        return np.einsum("ei,ej->eij", g, V)

    def outer_vg(V, g):  # rows from moments, cols from gradients
        return np.einsum("ei,ej->eij", V, g)

    sh_t = (2 * N, 3 * N)
    row1 = outer_gv(gx, V11) + outer_gv(gy, V12)  # momentum x rows
    row2 = outer_gv(gx, V12) + outer_gv(gy, V22)  # momentum y rows
    T = (_scatter(mesh, row1, 0, 0, sh_t) + _scatter(mesh, row1, 0, 2 * N, sh_t)
         + _scatter(mesh, row2, N, 0, sh_t) + _scatter(mesh, row2, N, 2 * N, sh_t)).tocsr()

    sh_w = (3 * N, 2 * N)
    w11 = 2.0 * (outer_vg(V11, gx) + outer_vg(V12, gy))   # C11 rows, ux cols
    w12a = outer_vg(V12, gx) + outer_vg(V22, gy)          # C12 rows, ux cols
    w12b = outer_vg(V11, gx) + outer_vg(V12, gy)          # C12 rows, uy cols
    w22 = 2.0 * (outer_vg(V12, gx) + outer_vg(V22, gy))   # C22 rows, uy cols
    W = (_scatter(mesh, w11, 0, 0, sh_w)
         + _scatter(mesh, w12a, N, 0, sh_w) + _scatter(mesh, w12b, N, N, sh_w)
         + _scatter(mesh, w22, 2 * N, N, sh_w)).tocsr()
    return SparseMatrix.from_scipy(T), SparseMatrix.from_scipy(W)


def load_capillary(mesh: Mesh, phi_nodal: np.ndarray, mu_nodal: np.ndarray) -> np.ndarray:
    """Momentum load of (phi grad mu, v), length 2N."""
    tri, grads, _, _ = _elem_data(mesh)
    N = mesh.n_nodes
    gm = np.einsum("ekd,ek->ed", grads, np.asarray(mu_nodal, float)[tri])  # (n_e, 2)
    Vphi = _coeff_moments(mesh, at_quad(mesh, np.asarray(phi_nodal, float)))
    out = np.zeros(2 * N)
    np.add.at(out, tri, Vphi * gm[:, None, 0])
    np.add.at(out[N:], tri, Vphi * gm[:, None, 1])
    return out


def load_relaxation(mesh: Mesh, h_quad: np.ndarray, C_tilde: np.ndarray) -> np.ndarray:
    """Tensor-equation load of (h tr(C_tilde) I, test), length 3N.

    Only the diagonal-component rows are loaded; the identity tensor has
    no off-diagonal part.
    """
    tri, _, _, _ = _elem_data(mesh)
    N = mesh.n_nodes
    cq = at_quad(mesh, np.asarray(C_tilde, float))
    trq = cq[:, :, 0] + cq[:, :, 2]
    V = _coeff_moments(mesh, np.asarray(h_quad, float) * trq)
    out = np.zeros(3 * N)
    np.add.at(out, tri, V)
    np.add.at(out[2 * N:], tri, V)
    return out


def velocity_boundary_dofs(mesh: Mesh) -> np.ndarray:
    """Both velocity components of every boundary node."""
    b = mesh.boundary_nodes
    return np.concatenate([b, b + mesh.n_nodes])


def eliminate_rows_cols(A: sp.spmatrix, dofs: np.ndarray,
                        unit_diagonal: bool = True) -> sp.csr_matrix:
    """Zero the given rows and columns; optionally set unit diagonal there."""
    n = A.shape[0]
    keep = np.ones(n)
    keep[dofs] = 0.0
    D = sp.diags(keep)
    out = (D @ A @ D).tocsr()
    if unit_diagonal:
        add = np.zeros(n)
        add[dofs] = 1.0
        out = (out + sp.diags(add)).tocsr()
    out.eliminate_zeros()
    return out


def zero_rows(A: sp.spmatrix, dofs: np.ndarray) -> sp.csr_matrix:
    keep = np.ones(A.shape[0])
    keep[dofs] = 0.0
    out = (sp.diags(keep) @ A).tocsr()
    out.eliminate_zeros()
    return out


def zero_cols(A: sp.spmatrix, dofs: np.ndarray) -> sp.csr_matrix:
    keep = np.ones(A.shape[1])
    keep[dofs] = 0.0
    out = (A @ sp.diags(keep)).tocsr()
    out.eliminate_zeros()
    return out
