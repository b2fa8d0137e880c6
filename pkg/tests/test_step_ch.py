import dataclasses

import numpy as np
import pytest

from vpsep.fields import State, at_quad, integrate
from vpsep.mesh import build_rect_mesh
from vpsep.model import (GinzburgLandau, ModelParams, f_taylor, potential_F,
                         standard_coefficients)
from vpsep.semilag import compute_feet, transport
from vpsep.step_ch import build_step1_system, step1_advance


def quiescent_state(mesh, phi, q=None):
    N = mesh.n_nodes
    return State(t=0.0, step=0, phi=np.asarray(phi, float),
                 q=np.zeros(N) if q is None else np.asarray(q, float),
                 mu=np.zeros(N), u=np.zeros((N, 2)), p=np.zeros(N),
                 C=np.tile([1.0, 0.0, 1.0], (N, 1)))


def zero_mobility(params):
    c = standard_coefficients(params)
    return dataclasses.replace(c, n=lambda phi: np.zeros_like(np.asarray(phi, float)))


def mass_integral(system, v):
    return float(np.ones(len(v)) @ (system.mass @ v))


class TestStationaryState:
    def test_uniform_minimum_is_fixed_point(self):
        mesh = build_rect_mesh(8, 8, 1.0, 1.0)
        params = ModelParams(potential=GinzburgLandau())
        state = quiescent_state(mesh, np.ones(mesh.n_nodes))
        phi1, q1, mu = step1_advance(mesh, state, params, dt=0.1,
                                     coeffs=zero_mobility(params))
        np.testing.assert_allclose(phi1, 1.0, atol=1e-10)
        np.testing.assert_allclose(q1, 0.0, atol=1e-12)
        np.testing.assert_allclose(mu, 0.0, atol=1e-10)


class TestMassConservation:
    def test_mean_preserved_over_random_quiescent_steps(self):
        mesh = build_rect_mesh(16, 16, 1.0, 1.0)
        params = ModelParams()
        rng = np.random.default_rng(1)
        state = quiescent_state(mesh, 0.4 + 1e-2 * rng.standard_normal(mesh.n_nodes),
                                q=1e-2 * rng.standard_normal(mesh.n_nodes))
        system = build_step1_system(mesh, params, state, dt=0.05)
        m0 = mass_integral(system, state.phi)
        for _ in range(50):
            phi1, q1, mu = step1_advance(mesh, state, params, dt=0.05)
            state = dataclasses.replace(state, phi=phi1, q=q1, mu=mu)
        m1 = mass_integral(system, state.phi)
        assert abs(m1 - m0) <= 1e-10 * max(1.0, abs(m0))

    def test_transported_mean_identity_with_flow(self):
        # the composition row tested against the constant function gives
        # integral(phi_new) = integral(transported phi) exactly
        mesh = build_rect_mesh(12, 12, 1.0, 1.0)
        params = ModelParams()
        rng = np.random.default_rng(2)
        N = mesh.n_nodes
        state = quiescent_state(mesh, 0.4 + 0.05 * rng.standard_normal(N),
                                q=0.1 * rng.standard_normal(N))
        u = 0.3 * rng.standard_normal((N, 2))
        u[mesh.boundary_nodes] = 0.0
        state = dataclasses.replace(state, u=u)
        dt = 0.02
        phi1, _, _ = step1_advance(mesh, state, params, dt)
        feet = compute_feet(mesh, state.u, dt)
        phi_star = transport(state.phi, feet)
        system = build_step1_system(mesh, params, state, dt)
        assert abs(mass_integral(system, phi1) - mass_integral(system, phi_star)) < 1e-10


class TestCouplingStructure:
    def test_cross_blocks_exact_transposes(self):
        mesh = build_rect_mesh(10, 10, 1.0, 1.0)
        params = ModelParams()
        rng = np.random.default_rng(3)
        state = quiescent_state(mesh, 0.4 + 0.1 * rng.standard_normal(mesh.n_nodes))
        system = build_step1_system(mesh, params, state, dt=0.1)
        diff = abs(system.cross_phi_block.T - system.cross_q_block)
        assert (diff.max() if diff.nnz else 0.0) == 0.0

    def test_energy_pairing_cancels(self):
        # q' (D_A K_n mu) and mu' (K_n D_A q) agree, so the cross terms
        # drop out of the discrete energy balance
        mesh = build_rect_mesh(10, 10, 1.0, 1.0)
        params = ModelParams()
        rng = np.random.default_rng(4)
        state = quiescent_state(mesh, 0.4 + 0.1 * rng.standard_normal(mesh.n_nodes))
        system = build_step1_system(mesh, params, state, dt=0.1)
        q = rng.standard_normal(mesh.n_nodes)
        mu = rng.standard_normal(mesh.n_nodes)
        a = q @ (system.cross_q_block @ mu)
        b = mu @ (system.cross_phi_block @ q)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


class TestChemicalPotentialRow:
    def test_mean_matches_linearized_potential(self):
        mesh = build_rect_mesh(12, 12, 1.0, 1.0)
        params = ModelParams()
        rng = np.random.default_rng(5)
        state = quiescent_state(mesh, 0.4 + 0.05 * rng.standard_normal(mesh.n_nodes))
        dt = 0.05
        phi1, _, mu = step1_advance(mesh, state, params, dt)
        system = build_step1_system(mesh, params, state, dt)
        lhs = mass_integral(system, mu)
        rhs = mass_integral(system, f_taylor(params, state.phi, phi1))
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


class TestGradientFlow:
    def test_energy_decreases_without_coupling(self):
        # kappa = 0 and zero cross mobility reduce the step to a pure
        # gradient flow; the discrete energy must not increase
        mesh = build_rect_mesh(32, 32, 1.0, 1.0)
        params = ModelParams(kappa=0.0)
        coeffs = zero_mobility(params)
        rng = np.random.default_rng(6)
        N = mesh.n_nodes
        state = quiescent_state(mesh, 0.4 + 1e-2 * rng.standard_normal(N),
                                q=0.1 * rng.standard_normal(N))
        system = build_step1_system(mesh, params, state, dt=0.1, coeffs=coeffs)
        K, M = system.stiffness, system.mass

        def energy(phi, q):
            grad = 0.5 * params.c0 * (phi @ (K @ phi))
            bulk = 0.5 * (q @ (M @ q))
            fvals = potential_F(params, at_quad(mesh, phi))
            return grad + bulk + integrate(mesh, fvals)

        e_prev = energy(state.phi, state.q)
        for _ in range(20):
            phi1, q1, mu = step1_advance(mesh, state, params, dt=0.1, coeffs=coeffs)
            state = dataclasses.replace(state, phi=phi1, q=q1, mu=mu)
            e_now = energy(state.phi, state.q)
            assert e_now <= e_prev + 1e-12 * max(1.0, abs(e_prev))
            e_prev = e_now


class TestSourceHook:
    def test_constant_source_shifts_mean_linearly(self):
        mesh = build_rect_mesh(8, 8, 1.0, 1.0)
        params = ModelParams()
        rng = np.random.default_rng(7)
        state = quiescent_state(mesh, 0.4 + 0.02 * rng.standard_normal(mesh.n_nodes))
        dt, s = 0.05, 0.3
        phi1, _, _ = step1_advance(mesh, state, params, dt,
                                   phi_source=np.full(mesh.n_nodes, s))
        system = build_step1_system(mesh, params, state, dt)
        m0 = mass_integral(system, state.phi)
        m1 = mass_integral(system, phi1)
        assert m1 - m0 == pytest.approx(dt * s * 1.0, rel=1e-10)


class TestValidation:
    def test_rejects_nonpositive_dt(self):
        mesh = build_rect_mesh(4, 4, 1.0, 1.0)
        state = quiescent_state(mesh, np.full(mesh.n_nodes, 0.4))
        with pytest.raises(ValueError):
            step1_advance(mesh, state, ModelParams(), dt=0.0)

    def test_rejects_nonfinite_state(self):
        mesh = build_rect_mesh(4, 4, 1.0, 1.0)
        phi = np.full(mesh.n_nodes, 0.4)
        phi[3] = np.nan
        state = quiescent_state(mesh, phi)
        with pytest.raises(ValueError):
            step1_advance(mesh, state, ModelParams(), dt=0.1)

    def test_deterministic(self):
        mesh = build_rect_mesh(8, 8, 1.0, 1.0)
        params = ModelParams()
        rng = np.random.default_rng(8)
        state = quiescent_state(mesh, 0.4 + 0.05 * rng.standard_normal(mesh.n_nodes))
        a = step1_advance(mesh, state, params, dt=0.1)
        b = step1_advance(mesh, state, params, dt=0.1)
        for x, y in zip(a, b):
            assert x.tobytes() == y.tobytes()
