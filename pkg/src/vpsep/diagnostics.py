"""Energy, mass, and positivity diagnostics, plus numeric inequality checks.

All integrals use the same 3-point edge-midpoint rule as the assembled
forms: nonlinear densities are evaluated after interpolating the nodal
fields to the quadrature points, so the reported energies are exactly
the quantities the scheme dissipates.

Two total energies are tracked. E_tot uses the trace-form elastic part
1/4 (tr C)^2 - 1/2 ln(det C), defined only where C is positive definite;
nodes failing the positivity guard are excluded from the integral and
reported through spd_fraction rather than aborting the run. E_alg swaps
the elastic part for the algebraic quarter Frobenius norm 1/4 |C|^2,
which is defined for any C and obeys a source-bounded growth estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import State, at_quad, element_gradients, integrate, mean
from .mesh import Mesh
from .model import Coefficients, ModelParams, potential_F
from .semilag import cfl_number

# determinant below this is treated as loss of positive definiteness
SPD_DET_TOL = 1e-14


@dataclass
class EnergyReport:
    """Energy components and conservation readings at one time level."""

    t: float
    E_mix: float
    E_bulk: float
    E_kin: float
    E_el: float
    E_tot: float
    E_alg: float
    mass: float
    dE: float
    spd_fraction: float
    cfl: float


@dataclass
class TraceNormReport:
    """Outcome of the trace-vs-entrywise norm comparison over sample fields."""

    p: int
    n_samples: int
    max_ratio: float
    violations: int

    @property
    def holds(self) -> bool:
        return self.violations == 0


@dataclass
class KornReport:
    """Both sides of the gradient / symmetric-gradient identity for one field."""

    grad_norm_sq: float
    twice_sym_norm_sq: float
    difference: float
    relative_difference: float


def spd_mask(C) -> np.ndarray:
    """Nodewise positivity of symmetric 2x2 tensors stored as (C11, C12, C22)."""
    C = np.asarray(C, float)
    det = C[:, 0] * C[:, 2] - C[:, 1] ** 2
    tr = C[:, 0] + C[:, 2]
    return (det > SPD_DET_TOL) & (tr > 0.0)


def _quad_trace_det(mesh: Mesh, C):
    Cq = at_quad(mesh, np.asarray(C, float))
    tr = Cq[..., 0] + Cq[..., 2]
    det = Cq[..., 0] * Cq[..., 2] - Cq[..., 1] ** 2
    return Cq, tr, det


def elastic_energy(mesh: Mesh, C) -> float:
    """Trace-form elastic energy; quadrature points with non-SPD C drop out."""
    _, tr, det = _quad_trace_det(mesh, C)
    ok = (det > SPD_DET_TOL) & (tr > 0.0)
    density = np.where(ok, 0.25 * tr ** 2 - 0.5 * np.log(np.where(ok, det, 1.0)),
                       0.0)
    return integrate(mesh, density)


def frobenius_energy(mesh: Mesh, C) -> float:
    """Quarter squared Frobenius norm of the tensor field."""
    Cq = at_quad(mesh, np.asarray(C, float))
    density = 0.25 * (Cq[..., 0] ** 2 + 2.0 * Cq[..., 1] ** 2 + Cq[..., 2] ** 2)
    return integrate(mesh, density)


def mass(mesh: Mesh, state_or_phi) -> float:
    """Mean of the phase field over the domain."""
    phi = state_or_phi.phi if isinstance(state_or_phi, State) else state_or_phi
    return mean(phi, mesh)


def mass_drift(history) -> float:
    """Change of the mass reading between the first and last entries."""
    vals = [h.mass if isinstance(h, EnergyReport) else float(h) for h in history]
    return vals[-1] - vals[0]


def energy_components(mesh: Mesh, state: State, params: ModelParams,
                      dt: float = 0.0, prev: EnergyReport | None = None
                      ) -> EnergyReport:
    """All energy components of a state, chained to the previous report.

    dt feeds the advective CFL reading (0 when omitted); prev supplies the
    previous total so the report carries the one-step energy difference.
    """
    grads = element_gradients(mesh, state.phi)
    grad_sq = float(np.einsum("ed,ed->", grads, grads) * mesh.element_area)
    phi_q = at_quad(mesh, state.phi)
    E_mix = 0.5 * params.c0 * grad_sq + integrate(mesh, potential_F(params, phi_q))

    q_q = at_quad(mesh, state.q)
    E_bulk = 0.5 * integrate(mesh, q_q ** 2)

    u_q = at_quad(mesh, state.u)
    E_kin = 0.5 * integrate(mesh, np.einsum("eqd,eqd->eq", u_q, u_q))

    E_el = elastic_energy(mesh, state.C)
    E_alg = E_mix + E_bulk + E_kin + frobenius_energy(mesh, state.C)
    E_tot = E_mix + E_bulk + E_kin + E_el

    frac = float(np.count_nonzero(spd_mask(state.C))) / mesh.n_nodes
    dE = 0.0 if prev is None else E_tot - prev.E_tot
    cfl = cfl_number(mesh, state.u, dt) if dt > 0.0 else 0.0

    return EnergyReport(t=state.t, E_mix=E_mix, E_bulk=E_bulk, E_kin=E_kin,
                        E_el=E_el, E_tot=E_tot, E_alg=E_alg,
                        mass=mass(mesh, state), dE=dE, spd_fraction=frac,
                        cfl=cfl)


def elastic_source_rate(mesh: Mesh, phi, C, coeffs: Coefficients) -> float:
    """Instantaneous production integral h(phi) (tr C)^2 bounding E_alg growth.

    Accumulating 1/2 * dt * rate along a run gives the admissible increase
    of the algebraic energy over its initial value.
    """
    h_q = coeffs.h(at_quad(mesh, np.asarray(phi, float)))
    _, tr, _ = _quad_trace_det(mesh, C)
    return integrate(mesh, h_q * tr ** 2)


def check_trace_norm_inequality(mesh: Mesh, samples, p: int = 2,
                                seed: int = 0) -> TraceNormReport:
    """Verify int (tr D)^p <= 2^(p-1) int sum_ij |D_ij|^p over sample fields.

    samples is either an iterable of nodal (N, 3) tensor fields or an
    integer count of uniform random fields drawn from the given seed. The
    entrywise sum counts the off-diagonal entry twice (full-matrix sum).
    """
    if isinstance(samples, (int, np.integer)):
        rng = np.random.default_rng(seed)
        n = int(samples)
        fields = (rng.uniform(-2.0, 2.0, (mesh.n_nodes, 3)) for _ in range(n))
    else:
        fields = samples

    d = 2
    max_ratio = 0.0
    count = 0
    violations = 0
    for D in fields:
        Dq = at_quad(mesh, np.asarray(D, float))
        tr = Dq[..., 0] + Dq[..., 2]
        lhs = integrate(mesh, np.abs(tr) ** p)
        entry_sum = (np.abs(Dq[..., 0]) ** p + 2.0 * np.abs(Dq[..., 1]) ** p
                     + np.abs(Dq[..., 2]) ** p)
        rhs = d ** (p - 1) * integrate(mesh, entry_sum)
        count += 1
        if lhs > rhs * (1.0 + 1e-12):
            violations += 1
        if rhs > 0.0:
            max_ratio = max(max_ratio, lhs / rhs)
    return TraceNormReport(p=p, n_samples=count, max_ratio=max_ratio,
                           violations=violations)


def check_korn_equality(mesh: Mesh, u) -> KornReport:
    """Compare int |grad u|^2 with 2 int |sym grad u|^2 for a nodal field.

    The two sides agree (up to interpolation error) exactly when the field
    is divergence free with vanishing boundary flux, e.g. velocities derived
    from a stream function that is constant on the boundary.
    """
    g = element_gradients(mesh, np.asarray(u, float))  # g[e, j, i] = d_j u_i
    grad_sq = float(np.einsum("eji,eji->", g, g) * mesh.element_area)
    sym = 0.5 * (g + np.swapaxes(g, 1, 2))
    sym_sq = float(np.einsum("eji,eji->", sym, sym) * mesh.element_area)
    twice = 2.0 * sym_sq
    diff = abs(grad_sq - twice)
    scale = max(grad_sq, twice)
    rel = diff / scale if scale > 0.0 else 0.0
    return KornReport(grad_norm_sq=grad_sq, twice_sym_norm_sq=twice,
                      difference=diff, relative_difference=rel)
