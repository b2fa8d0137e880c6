"""Refinement studies: manufactured-solution and pure-transport accuracy.

These drive the solver components against problems with known exact
solutions and report L2 errors with observed convergence orders, for use
by the verification scripts and the acceptance suite.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .fields import State, at_quad, integrate, quad_coords
from .mesh import build_rect_mesh
from .model import GinzburgLandau, ModelParams, standard_coefficients
from .semilag import compute_feet, transport
from .sparse import SolverOptions
from .step_ch import step1_advance


@dataclass
class RefinementStudy:
    """Errors on a sequence of meshes and the orders observed between them."""

    levels: tuple
    errors: list
    orders: list


def _observed_orders(levels, errors) -> list:
    orders = []
    for k in range(1, len(errors)):
        ratio = levels[k] / levels[k - 1]
        orders.append(float(np.log(errors[k - 1] / errors[k]) / np.log(ratio)))
    return orders


def _l2_error(mesh, nodal, exact_at) -> float:
    qc = quad_coords(mesh)
    exact = exact_at(qc[..., 0], qc[..., 1])
    diff = at_quad(mesh, nodal) - exact
    return float(np.sqrt(integrate(mesh, diff ** 2)))


def mms_phase_field_study(levels=(16, 32, 64), T=0.125, c0=1.0,
                          tol=1e-11) -> RefinementStudy:
    """Composition-equation convergence in the fourth-order sublimit.

    Unit mobility, no potential force, no stress coupling, quiescent flow:
    the scheme then integrates phi_t = -c0 laplacian^2 phi + source. The
    manufactured field cos(pi x) cos(pi y)(1 + t) satisfies the natural
    boundary conditions; the time step is h^2 so one observed order in h
    reflects both refinements together.
    """
    params = ModelParams(c0=c0, kappa=0.0,
                         potential=GinzburgLandau(a_coef=0.0))
    amp = 4.0 * c0 * np.pi ** 4
    errors = []
    for n in levels:
        mesh = build_rect_mesh(n, n, 1.0, 1.0)
        coeffs = dataclasses.replace(
            standard_coefficients(params),
            m=lambda phi: np.ones_like(np.asarray(phi, dtype=float)))
        dt = 1.0 / n ** 2
        n_steps = int(round(T / dt))
        x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
        shape = np.cos(np.pi * x) * np.cos(np.pi * y)
        N = mesh.n_nodes
        state = State(t=0.0, step=0, phi=shape.copy(), q=np.zeros(N),
                      mu=np.zeros(N), u=np.zeros((N, 2)), p=np.zeros(N),
                      C=np.tile([1.0, 0.0, 1.0], (N, 1)))
        opts = SolverOptions(tol=tol)
        for _ in range(n_steps):
            t_mid = state.t + 0.5 * dt
            source = shape * (1.0 + amp * (1.0 + t_mid))
            phi_new, q_new, mu_half = step1_advance(
                mesh, state, params, dt, coeffs=coeffs, solver_opts=opts,
                phi_source=source)
            state = State(t=state.t + dt, step=state.step + 1, phi=phi_new,
                          q=q_new, mu=mu_half, u=state.u, p=state.p,
                          C=state.C)
        t_fin = n_steps * dt
        errors.append(_l2_error(
            mesh, state.phi,
            lambda qx, qy: np.cos(np.pi * qx) * np.cos(np.pi * qy)
            * (1.0 + t_fin)))
    return RefinementStudy(levels=tuple(levels), errors=errors,
                           orders=_observed_orders(levels, errors))


def transport_translation_study(levels=(32, 64, 128), velocity=(1.0, 0.5),
                                T=0.25, sigma=0.05,
                                center=(0.3, 0.4)) -> RefinementStudy:
    """Backward-characteristic transport of a compact Gaussian bump.

    Constant velocity, time step h, interior support at all times, so the
    only error is repeated P1 interpolation: first order in (h, dt).
    """
    vel = np.asarray(velocity, dtype=float)
    cx, cy = center

    def bump(px, py, shift_x=0.0, shift_y=0.0):
        r2 = (px - cx - shift_x) ** 2 + (py - cy - shift_y) ** 2
        return np.exp(-r2 / (2.0 * sigma ** 2))

    errors = []
    for n in levels:
        mesh = build_rect_mesh(n, n, 1.0, 1.0)
        dt = 1.0 / n
        n_steps = int(round(T / dt))
        field = bump(mesh.nodes[:, 0], mesh.nodes[:, 1])
        u = np.tile(vel, (mesh.n_nodes, 1))
        for _ in range(n_steps):
            feet = compute_feet(mesh, u, dt)
            field = transport(field, feet)
        sx, sy = n_steps * dt * vel
        errors.append(_l2_error(
            mesh, field, lambda qx, qy: bump(qx, qy, sx, sy)))
    return RefinementStudy(levels=tuple(levels), errors=errors,
                           orders=_observed_orders(levels, errors))
