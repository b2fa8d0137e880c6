import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpsep.fields import ScalarField, make_initial_state
from vpsep.mesh import build_rect_mesh
from vpsep.model import InitialConditionSpec, experiment_preset
from vpsep.semilag import cfl_number, compute_feet, transport, transport_many


def nodal(mesh, fn):
    return fn(mesh.nodes[:, 0], mesh.nodes[:, 1])


class TestComputeFeet:
    def test_zero_velocity_feet_are_nodes(self):
        mesh = build_rect_mesh(8, 8, 1.0, 1.0)
        feet = compute_feet(mesh, np.zeros((mesh.n_nodes, 2)), dt=0.3)
        np.testing.assert_array_equal(feet.coords, mesh.nodes)
        # every foot sits exactly on a vertex of its host element
        np.testing.assert_allclose(feet.bary.max(axis=1), 1.0, atol=0)

    def test_constant_velocity_translation_with_clamp(self):
        mesh = build_rect_mesh(4, 4, 1.0, 1.0)
        u = np.tile([1.0, 0.0], (mesh.n_nodes, 1))
        feet = compute_feet(mesh, u, dt=0.5)
        expected = mesh.nodes.copy()
        expected[:, 0] = np.maximum(expected[:, 0] - 0.5, 0.0)
        np.testing.assert_allclose(feet.coords, expected, atol=1e-15)

    def test_rotating_disc_foot(self):
        # disc velocity u = ((y-64)/128, (64-x)/128): at (64, 114) the
        # backward-traced foot for dt=1 is (64 - 50/128, 114)
        mesh = build_rect_mesh(128, 128, 128.0, 128.0)
        _, ics = experiment_preset(3)
        state = make_initial_state(mesh, ics, seed=0)
        node = np.flatnonzero((mesh.nodes[:, 0] == 64.0) & (mesh.nodes[:, 1] == 114.0))[0]
        feet = compute_feet(mesh, state.u, dt=1.0)
        np.testing.assert_allclose(feet.coords[node], [64.0 - 50.0 / 128.0, 114.0],
                                   atol=1e-13)

    def test_feet_inside_closed_domain(self):
        mesh = build_rect_mesh(8, 8, 2.0, 1.0)
        rng = np.random.default_rng(5)
        u = rng.normal(scale=10.0, size=(mesh.n_nodes, 2))
        feet = compute_feet(mesh, u, dt=1.0)
        assert feet.coords[:, 0].min() >= 0.0 and feet.coords[:, 0].max() <= 2.0
        assert feet.coords[:, 1].min() >= 0.0 and feet.coords[:, 1].max() <= 1.0

    def test_dt_must_be_positive(self):
        mesh = build_rect_mesh(2, 2, 1.0, 1.0)
        with pytest.raises(ValueError):
            compute_feet(mesh, np.zeros((mesh.n_nodes, 2)), dt=0.0)


class TestTransport:
    def test_zero_velocity_is_bitwise_identity(self):
        mesh = build_rect_mesh(16, 16, 16.0, 16.0)
        rng = np.random.default_rng(0)
        vals = rng.normal(size=mesh.n_nodes)
        feet = compute_feet(mesh, np.zeros((mesh.n_nodes, 2)), dt=0.1)
        out = transport(vals, feet)
        assert out.tobytes() == vals.tobytes()

    def test_affine_field_constant_velocity_exact_on_interior(self):
        mesh = build_rect_mesh(10, 10, 1.0, 1.0)
        vals = nodal(mesh, lambda x, y: 2.0 * x - 3.0 * y + 1.0)
        u = np.tile([0.4, -0.2], (mesh.n_nodes, 1))
        dt = 0.1
        feet = compute_feet(mesh, u, dt)
        out = transport(vals, feet)
        # interior nodes whose feet stayed interior see the exact shift
        shifted_x = mesh.nodes[:, 0] - 0.4 * dt
        shifted_y = mesh.nodes[:, 1] + 0.2 * dt
        inside = ((shifted_x >= 0) & (shifted_x <= 1) & (shifted_y >= 0) & (shifted_y <= 1))
        expected = 2.0 * shifted_x - 3.0 * shifted_y + 1.0
        np.testing.assert_allclose(out[inside], expected[inside], atol=1e-12)

    def test_max_principle(self):
        mesh = build_rect_mesh(12, 12, 1.0, 1.0)
        rng = np.random.default_rng(2)
        vals = rng.uniform(-3.0, 7.0, size=mesh.n_nodes)
        u = rng.normal(scale=2.0, size=(mesh.n_nodes, 2))
        feet = compute_feet(mesh, u, dt=0.25)
        out = transport(vals, feet)
        assert out.min() >= vals.min() - 1e-12
        assert out.max() <= vals.max() + 1e-12

    def test_constant_field_preserved_exactly(self):
        mesh = build_rect_mesh(6, 9, 2.0, 3.0)
        rng = np.random.default_rng(3)
        u = rng.normal(size=(mesh.n_nodes, 2))
        feet = compute_feet(mesh, u, dt=0.5)
        out = transport(np.full(mesh.n_nodes, 4.25), feet)
        # bary rows are renormalized to sum exactly to one
        np.testing.assert_allclose(out, 4.25, atol=1e-14)

    def test_multicomponent_transport(self):
        mesh = build_rect_mesh(8, 8, 1.0, 1.0)
        rng = np.random.default_rng(4)
        C = rng.normal(size=(mesh.n_nodes, 3))
        u = rng.normal(scale=0.5, size=(mesh.n_nodes, 2))
        feet = compute_feet(mesh, u, dt=0.1)
        out = transport(C, feet)
        assert out.shape == (mesh.n_nodes, 3)
        for k in range(3):
            np.testing.assert_allclose(out[:, k], transport(C[:, k], feet),
                                       rtol=0, atol=1e-14)

    def test_transport_many_matches_individual(self):
        mesh = build_rect_mesh(5, 5, 1.0, 1.0)
        rng = np.random.default_rng(6)
        a = rng.normal(size=mesh.n_nodes)
        b = rng.normal(size=(mesh.n_nodes, 2))
        u = rng.normal(scale=0.3, size=(mesh.n_nodes, 2))
        feet = compute_feet(mesh, u, dt=0.2)
        ta, tb = transport_many(feet, a, b)
        np.testing.assert_array_equal(ta, transport(a, feet))
        np.testing.assert_array_equal(tb, transport(b, feet))

    def test_accepts_field_wrapper(self):
        mesh = build_rect_mesh(4, 4, 1.0, 1.0)
        vals = nodal(mesh, lambda x, y: x)
        feet = compute_feet(mesh, np.zeros((mesh.n_nodes, 2)), dt=1.0)
        out = transport(ScalarField(mesh, vals), feet)
        np.testing.assert_array_equal(out, vals)

    def test_gaussian_translation_converges(self):
        # advect a Gaussian with constant velocity; L2 error at fixed time
        # must shrink under simultaneous (h, dt) refinement
        def run(n):
            mesh = build_rect_mesh(n, n, 1.0, 1.0)
            dt = 0.2 / n
            steps = n // 2  # total time 0.1
            g = lambda x, y, t: np.exp(-80.0 * ((x - 0.35 - 0.5 * t) ** 2 + (y - 0.5) ** 2))
            vals = nodal(mesh, lambda x, y: g(x, y, 0.0))
            u = np.tile([0.5, 0.0], (mesh.n_nodes, 1))
            feet = compute_feet(mesh, u, dt)
            for _ in range(steps):
                vals = transport(vals, feet)
            exact = nodal(mesh, lambda x, y: g(x, y, steps * dt))
            return np.sqrt(np.mean((vals - exact) ** 2))

        errs = [run(n) for n in (16, 32, 64)]
        assert errs[1] < errs[0] and errs[2] < errs[1]
        # first-order scheme: expect roughly halving per refinement
        assert errs[2] < 0.7 * errs[1]


class TestCfl:
    def test_zero_velocity(self):
        mesh = build_rect_mesh(4, 4, 1.0, 1.0)
        assert cfl_number(mesh, np.zeros((mesh.n_nodes, 2)), dt=0.5) == 0.0

    def test_known_value(self):
        mesh = build_rect_mesh(4, 4, 1.0, 1.0)  # h = 0.25
        u = np.tile([3.0, 4.0], (mesh.n_nodes, 1))  # speed 5
        assert cfl_number(mesh, u, dt=0.1) == pytest.approx(5.0 * 0.1 / 0.25)


@settings(max_examples=25, deadline=None)
@given(ux=st.floats(-2, 2), uy=st.floats(-2, 2), dt=st.floats(0.01, 1.0))
def test_feet_always_inside_property(ux, uy, dt):
    mesh = build_rect_mesh(6, 6, 1.0, 1.0)
    u = np.tile([ux, uy], (mesh.n_nodes, 1))
    feet = compute_feet(mesh, u, dt)
    assert feet.coords.min() >= 0.0 and feet.coords.max() <= 1.0
    assert feet.bary.min() >= 0.0
    np.testing.assert_allclose(feet.bary.sum(axis=1), 1.0, atol=1e-12)
