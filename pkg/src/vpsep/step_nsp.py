"""Flow half of the splitting: one implicit step for (u, p, C).

Velocity, pressure, and the conformation tensor are advanced together.
The nonlinear conformation products are handled by an inner fixed-point
loop: the lagged tensor (the previous inner iterate, seeded with the
transported old tensor) enters the coupling blocks, and each pass solves
one coupled 6N x 6N linear system. Pressure is stabilized with the
element-diameter-scaled gradient form, pinned against its constant null
vector by a tiny mass shift, and projected to zero mean after each solve.

The C12 component rows are pre-scaled so all three tensor components
share the scalar operator  M/dt + eps*K + M_w,  which the iterative
solver exploits: systems above the direct threshold are solved by
BiCGStab preconditioned with one LU of the velocity-pressure saddle
block per step and one LU of the scalar tensor operator per iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (assemble_div, assemble_mass, assemble_pressure_stab,
                       assemble_step2_coupling, assemble_stiffness,
                       assemble_viscous, assemble_weighted_mass,
                       load_capillary, load_relaxation, velocity_boundary_dofs,
                       zero_cols, zero_rows)
from .fields import State, at_quad
from .mesh import Mesh
from .model import Coefficients, ModelParams, standard_coefficients
from .semilag import compute_feet, transport
from .sparse import SolverOptions

PRESSURE_PIN = 1e-12


@dataclass
class Step2Options:
    """Inner-loop and solver controls for the flow step."""

    tol_fp: float = 1e-8
    max_fp: int = 50
    direct_threshold: int = 12_000   # full 6N system size for sparse LU
    fully_lagged: bool = False       # stress explicit in the momentum rows


@dataclass
class FixedPointReport:
    iterations: int
    final_relative_change: float
    converged: bool
    history: list = field(default_factory=list)
    linear_method: str = ""


def _flat(C: np.ndarray) -> np.ndarray:
    """(N, 3) tensor storage -> component-blocked vector of length 3N."""
    return np.ascontiguousarray(C.T).ravel()


def _unflat(x: np.ndarray, N: int) -> np.ndarray:
    return np.ascontiguousarray(x.reshape(3, N).T)


class _Step2LinearSolver:
    """Solves the coupled (u, p, C) system of one inner iteration.

    Below the size threshold: sparse LU on the full matrix. Above it:
    BiCGStab preconditioned by a block triangular sweep built from an LU
    of the velocity-pressure saddle (factored once per step) and an LU of
    the scalar tensor operator (refreshed per iteration).
    """

    def __init__(self, A_mom, BT_neg, B_el, Sp, N: int, opts: SolverOptions,
                 threshold: int):
        self.N = N
        self.opts = opts
        self.direct = 6 * N <= threshold
        if not self.direct:
            saddle = sp.bmat([[A_mom, BT_neg], [B_el, Sp]], format="csc")
            self.lu_saddle = spla.splu(saddle)

    def solve(self, S_full: sp.csr_matrix, rhs: np.ndarray, A_s: sp.csr_matrix,
              T_el: sp.csr_matrix) -> tuple[np.ndarray, str]:
        nb = np.linalg.norm(rhs)
        if nb == 0.0:
            return np.zeros(S_full.shape[0]), "zero-rhs"
        if self.direct:
            x = spla.splu(S_full.tocsc()).solve(rhs)
            self._check(S_full, x, rhs, nb, "direct")
            return x, "direct"

        N = self.N
        lu_As = spla.splu(A_s.tocsc())

        def prec(r):
            r = np.asarray(r, dtype=float)
            z = np.empty(r.shape[0])
            rc = r[3 * N:]
            for k in range(3):
                z[3 * N + k * N: 3 * N + (k + 1) * N] = lu_As.solve(rc[k * N:(k + 1) * N])
            rup = r[:3 * N].copy()
            rup[:2 * N] -= T_el @ z[3 * N:]
            z[:3 * N] = self.lu_saddle.solve(rup)
            return z

        M = spla.LinearOperator(S_full.shape, matvec=prec)
        kw = dict(atol=0.0, maxiter=300, M=M, x0=np.zeros(S_full.shape[0]))
        try:
            kw["rtol"] = 0.1 * self.opts.tol
            x, info = spla.bicgstab(S_full, rhs, **kw)
        except TypeError:
            kw.pop("rtol")
            kw["tol"] = 0.1 * self.opts.tol
            x, info = spla.bicgstab(S_full, rhs, **kw)
        res = np.linalg.norm(rhs - S_full @ x) / nb
        if info == 0 and res <= self.opts.tol:
            return x, "bicgstab"
        x = spla.splu(S_full.tocsc()).solve(rhs)
        self._check(S_full, x, rhs, nb, "bicgstab+direct")
        return x, "bicgstab+direct"

    def _check(self, S, x, rhs, nb, method):
        res = np.linalg.norm(rhs - S @ x) / nb
        if not np.isfinite(res) or res > max(self.opts.tol, 1e-8):
            raise RuntimeError(f"flow-step linear solve residual {res:.3e} "
                               f"exceeds tolerance ({method})")


def step2_advance(mesh: Mesh, state: State, params: ModelParams, dt: float,
                  phi_new: np.ndarray, mu_half: np.ndarray,
                  coeffs: Coefficients | None = None,
                  solver_opts: SolverOptions | None = None,
                  step2_opts: Step2Options | None = None,
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray, FixedPointReport]:
    """Advance (u, p, C) one step; returns (u_new, p_new, C_new, report).

    ``phi_new`` and ``mu_half`` come from the preceding phase-field step;
    viscosity and relaxation coefficients are evaluated at the midpoint
    composition (phi_new + phi_old)/2.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    coeffs = coeffs or standard_coefficients(params)
    opts = solver_opts or SolverOptions()
    s2 = step2_opts or Step2Options()
    N = mesh.n_nodes
    bd = velocity_boundary_dofs(mesh)

    phi_half = 0.5 * (np.asarray(phi_new, float) + state.phi)
    eta_nodal = np.asarray(coeffs.eta(phi_half), float)
    h_quad = at_quad(mesh, np.asarray(coeffs.h(phi_half), float))

    if np.any(state.u):
        feet = compute_feet(mesh, state.u, dt)
        u_star = transport(state.u, feet)
        C_star = transport(state.C, feet)
    else:
        u_star, C_star = state.u, state.C
    u_star = u_star.copy()
    u_star[mesh.boundary_nodes] = 0.0

    M = assemble_mass(mesh).scipy()
    K = assemble_stiffness(mesh).scipy()
    M2dt = sp.block_diag((M, M), format="csr") / dt
    A_mom = (M2dt + assemble_viscous(mesh, eta_nodal, eliminate_boundary=False).scipy()).tocsr()
    A_mom = _eliminate_square(A_mom, bd)
    B = assemble_div(mesh).scipy()
    B_el = zero_cols(B, bd)
    BT_neg = (-B_el.T).tocsr()
    Sp = assemble_pressure_stab(mesh, params.delta0).scipy()
    pin_scale = abs(Sp).max() if Sp.nnz and abs(Sp).max() > 0 else abs(M).max()
    Sp = (Sp + PRESSURE_PIN * pin_scale * M).tocsr()

    A_s_base = (M / dt + params.eps * K).tocsr()
    Mdt3 = sp.block_diag((M, M, M), format="csr") / dt

    L_cap = load_capillary(mesh, state.phi, mu_half)
    rhs_u = M2dt @ np.asarray(u_star, float).T.ravel() - L_cap
    rhs_u[bd] = 0.0
    rhs_p = np.zeros(N)
    cstar_flat = _flat(np.asarray(C_star, float))
    rhs_c_base = Mdt3 @ cstar_flat

    lin = _Step2LinearSolver(A_mom, BT_neg, B_el, Sp, N, opts, s2.direct_threshold)
    Z_pc = sp.csr_matrix((N, 3 * N))
    Z_cp = sp.csr_matrix((3 * N, N))

    u_flat = np.asarray(u_star, float).T.ravel()
    u_flat = u_flat.copy()
    u_flat[bd] = 0.0
    C_flat = cstar_flat.copy()
    C_tilde = C_star
    report = FixedPointReport(0, np.inf, False)
    vol = mesh.Lx * mesh.Ly
    ones = np.ones(N)

    if s2.max_fp < 1:
        raise ValueError("max_fp must be at least 1")
    for k in range(s2.max_fp):
        ctq = at_quad(mesh, C_tilde)
        trq = ctq[:, :, 0] + ctq[:, :, 2]
        Mw = assemble_weighted_mass(mesh, h_quad * trq ** 2).scipy()
        A_s = (A_s_base + Mw).tocsr()
        A_s3 = sp.block_diag((A_s, A_s, A_s), format="csr")
        T_raw, W_raw = assemble_step2_coupling(mesh, C_tilde)
        T_el = zero_rows(T_raw.scipy(), bd)
        W_el = zero_cols(W_raw.scipy(), bd)
        rhs_c = rhs_c_base + load_relaxation(mesh, h_quad, C_tilde)

        if s2.fully_lagged:
            rhs = np.concatenate([rhs_u - T_el @ _flat(C_tilde), rhs_p, rhs_c])
            S_full = sp.bmat([[A_mom, BT_neg, None],
                              [B_el, Sp, None],
                              [-W_el, Z_cp, A_s3]], format="csr")
        else:
            rhs = np.concatenate([rhs_u, rhs_p, rhs_c])
            S_full = sp.bmat([[A_mom, BT_neg, T_el],
                              [B_el, Sp, Z_pc],
                              [-W_el, Z_cp, A_s3]], format="csr")

        x, method = lin.solve(S_full, rhs, A_s, T_el)
        u_new = x[:2 * N]
        p_new = x[2 * N:3 * N]
        C_new = x[3 * N:]
        p_new = p_new - (ones @ (M @ p_new)) / vol

        num = np.linalg.norm(np.concatenate([u_new - u_flat, C_new - C_flat]))
        den = np.linalg.norm(np.concatenate([u_new, C_new]))
        rel = num / den if den > 0 else num
        report.history.append(rel)
        report.iterations = k + 1
        report.final_relative_change = rel
        report.linear_method = method
        u_flat, C_flat, p_flat = u_new, C_new, p_new
        C_tilde = _unflat(C_new, N)
        if rel < s2.tol_fp:
            report.converged = True
            break

    if not report.converged:
        raise RuntimeError(
            f"flow-step fixed point did not converge in {s2.max_fp} iterations "
            f"at t={state.t:.6g} (step {state.step}); relative changes: "
            f"{[f'{r:.2e}' for r in report.history[-8:]]}")
    if not np.all(np.isfinite(u_flat)) or not np.all(np.isfinite(C_flat)):
        raise RuntimeError(f"non-finite flow solution at t={state.t:.6g}")

    u_out = np.ascontiguousarray(u_flat.reshape(2, N).T)
    return u_out, p_flat, _unflat(C_flat, N), report


def _eliminate_square(A: sp.csr_matrix, dofs: np.ndarray) -> sp.csr_matrix:
    keep = np.ones(A.shape[0])
    keep[dofs] = 0.0
    D = sp.diags(keep)
    add = np.zeros(A.shape[0])
    add[dofs] = 1.0
    out = (D @ A @ D + sp.diags(add)).tocsr()
    out.eliminate_zeros()
    return out


def conformation_equilibrium(h_val: float, dt: float, c0_scalar: float,
                             n_steps: int, tol_fp: float = 1e-12,
                             max_fp: int = 100) -> np.ndarray:
    """Spatially uniform reduction of the tensor update, as (c11, c12, c22).

    An isotropic uniform tensor c*I with all gradients zero evolves by
        (c' - c)/dt + h (2 c_tilde)^2 c' = h (2 c_tilde),
    iterated over the lag until self-consistent. The relaxation balance
    tr(C)^2 C = tr(C) I fixes the stationary value c = 1/sqrt(2).
    """
    c = float(c0_scalar)
    for _ in range(n_steps):
        ct = c
        for _ in range(max_fp):
            tr = 2.0 * ct
            c_next = (c / dt + h_val * tr) / (1.0 / dt + h_val * tr * tr)
            if abs(c_next - ct) <= tol_fp * max(1.0, abs(c_next)):
                ct = c_next
                break
            ct = c_next
        c = ct
    return np.array([c, 0.0, c])
