"""Phase-field half of the splitting: one implicit step for (phi, q, mu).

The three nodal unknowns are advanced together as a single nonsymmetric
3N x 3N solve. Advection enters through characteristic transport of the
previous values, the chemical potential is treated at the half step, the
potential derivative by a linearized Taylor expansion around the old
composition, and the bulk-stress coupling through nodally interpolated
modulus products whose paired blocks are exact transposes. Testing the
composition row against the constant function shows the scheme preserves
the mean of phi up to solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import (assemble_A_coupled_stiffness, assemble_cross_coupling,
                       assemble_mass, assemble_stiffness, assemble_weighted_mass)
from .fields import State, at_quad
from .mesh import Mesh
from .model import (Coefficients, ModelParams, potential_f, potential_fprime,
                    standard_coefficients)
from .semilag import compute_feet, transport
from .sparse import SolverOptions, SparseMatrix, solve


@dataclass
class Step1System:
    """Assembled blocks and composed linear system for one phase-field step."""

    lhs: SparseMatrix            # 3N x 3N, unknown order (phi, q, mu)
    rhs: np.ndarray
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix     # unit weight
    mobility_stiffness: sp.csr_matrix
    correction_stiffness: sp.csr_matrix   # velocity-correction weight phi^2
    cross_phi_block: sp.csr_matrix        # acts on q in the phi row
    cross_q_block: sp.csr_matrix          # acts on mu in the q row
    relax_block: sp.csr_matrix            # modulus-coupled stiffness + inverse-time mass
    taylor_diag: np.ndarray               # nodal potential curvature f'(phi_old)


def build_step1_system(mesh: Mesh, params: ModelParams, state: State, dt: float,
                       coeffs: Coefficients | None = None,
                       phi_star_rhs: np.ndarray | None = None,
                       q_star_rhs: np.ndarray | None = None,
                       phi_source: np.ndarray | None = None) -> Step1System:
    """Assemble the coupled (phi, q, mu) system at the current state.

    ``phi_star_rhs`` / ``q_star_rhs`` are the transported old values; when
    omitted the plain old values are used (quiescent flow). ``phi_source``
    is an optional nodal rate added to the composition equation, used by
    manufactured-solution studies.
    """
    if coeffs is None:
        coeffs = standard_coefficients(params)
    phi_n, q_n = state.phi, state.q
    N = mesh.n_nodes

    M = assemble_mass(mesh).scipy()
    K = assemble_stiffness(mesh).scipy()
    Km = assemble_stiffness(mesh, coeffs.m(phi_n)).scipy()
    Kcorr = assemble_stiffness(mesh, phi_n ** 2).scipy()
    A_nodal = np.asarray(coeffs.A(phi_n), dtype=float)
    cross_phi, cross_q = assemble_cross_coupling(mesh, coeffs.n(phi_n), A_nodal)
    cross_phi, cross_q = cross_phi.scipy(), cross_q.scipy()
    DKD = assemble_A_coupled_stiffness(mesh, A_nodal).scipy()
    inv_tau = 1.0 / np.asarray(coeffs.tau(phi_n), dtype=float)
    M_tau = assemble_weighted_mass(mesh, at_quad(mesh, inv_tau)).scipy()
    relax = (DKD + M_tau).tocsr()

    fp = np.asarray(potential_fprime(params, phi_n), dtype=float)
    f0 = np.asarray(potential_f(params, phi_n), dtype=float)

    kap, c0 = params.kappa, params.c0
    Mdt = M / dt
    A11 = Mdt
    A12 = -(kap / 2.0) * cross_phi
    A13 = (Km + dt * Kcorr).tocsr()
    A22 = (Mdt + 0.5 * relax).tocsr()
    A23 = -kap * cross_q
    A31 = (-(c0 / 2.0) * K - 0.5 * (M @ sp.diags(fp))).tocsr()
    A33 = M
    lhs = sp.bmat([[A11, A12, A13],
                   [None, A22, A23],
                   [A31, None, A33]], format="csr")

    phi_star = phi_n if phi_star_rhs is None else phi_star_rhs
    q_star = q_n if q_star_rhs is None else q_star_rhs
    b = np.empty(3 * N)
    b[:N] = Mdt @ phi_star + (kap / 2.0) * (cross_phi @ q_n)
    if phi_source is not None:
        b[:N] += M @ np.asarray(phi_source, dtype=float)
    b[N:2 * N] = Mdt @ q_star - 0.5 * (relax @ q_n)
    b[2 * N:] = (c0 / 2.0) * (K @ phi_n) + M @ (f0 - 0.5 * fp * phi_n)

    return Step1System(lhs=SparseMatrix.from_scipy(lhs), rhs=b, mass=M,
                       stiffness=K, mobility_stiffness=Km,
                       correction_stiffness=Kcorr, cross_phi_block=cross_phi,
                       cross_q_block=cross_q, relax_block=relax, taylor_diag=fp)


def step1_advance(mesh: Mesh, state: State, params: ModelParams, dt: float,
                  coeffs: Coefficients | None = None,
                  solver_opts: SolverOptions | None = None,
                  phi_source: np.ndarray | None = None,
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance (phi, q) one step and return (phi_new, q_new, mu_half).

    mu_half is the half-step chemical potential consumed by the flow step.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    for name, arr in (("phi", state.phi), ("q", state.q), ("u", state.u)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite values in state field {name}")

    if np.any(state.u):
        feet = compute_feet(mesh, state.u, dt)
        phi_star = transport(state.phi, feet)
        q_star = transport(state.q, feet)
    else:
        phi_star, q_star = state.phi, state.q

    system = build_step1_system(mesh, params, state, dt, coeffs=coeffs,
                                phi_star_rhs=phi_star, q_star_rhs=q_star,
                                phi_source=phi_source)
    x, report = solve(system.lhs, system.rhs, solver_opts)
    if not report.converged:
        raise RuntimeError(
            f"phase-field solve failed at t={state.t:.6g} (step {state.step}): "
            f"{report.method}, {report.iterations} iterations, "
            f"relative residual {report.final_relative_residual:.3e}")
    if not np.all(np.isfinite(x)):
        raise RuntimeError(
            f"non-finite phase-field solution at t={state.t:.6g} (step {state.step})")

    N = mesh.n_nodes
    return x[:N], x[N:2 * N], x[2 * N:]
