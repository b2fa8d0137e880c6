"""Scalar closures of the mixture model and the experiment presets.

Holds the double-well and logarithmic mixing potentials with their
derivatives, the Taylor-linearized potential derivative used by the
linearly implicit step, the composition-dependent coefficients
(mobilities, bulk modulus, relaxation time, relaxation rate, viscosity),
and the three canned experiment setups.

The experimental coefficient functions tau = 10 phi^2 and
h = 1/(5 phi^2) are unbounded as phi -> 0, so phi is clamped to a
configurable interior interval before evaluating them (and inside the
cot argument of the bulk modulus); the viscosity 1 - phi^2 is floored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class ClampRange:
    lower: float = 1e-4
    upper: float = 1.0 - 1e-4


@dataclass(frozen=True)
class GinzburgLandau:
    """Double well a_coef * phi^2 (phi - 1)^2 with minima at 0 and 1."""

    a_coef: float = 1.0
    tag: str = field(default="ginzburg_landau", init=False, repr=False)


@dataclass(frozen=True)
class ModifiedGinzburgLandau:
    """Double well (phi - a)^2 (phi - b)^2 with minima shifted inside (0, 1)."""

    a: float = 0.134791
    b: float = 1.0 - 0.134791
    tag: str = field(default="modified_gl", init=False, repr=False)


@dataclass(frozen=True)
class FloryHuggins:
    """Logarithmic mixing potential with interaction parameter chi."""

    n_p: float = 1.0
    n_s: float = 1.0
    chi: float = 28.0 / 11.0
    tag: str = field(default="flory_huggins", init=False, repr=False)


Potential = Union[GinzburgLandau, ModifiedGinzburgLandau, FloryHuggins]


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical constants of the coupled model.

    c0 scales the interface energy, eps the conformation diffusion,
    kappa in [0, 1] weights the cross-diffusion coupling between the
    phase field and the bulk stress, delta0 the pressure stabilization.
    """

    c0: float = 1.0
    eps: float = 1.0
    kappa: float = 1.0
    # kept small: the stabilization relaxes the divergence constraint, and
    # transported-composition conservation degrades linearly with it
    delta0: float = 0.001
    potential: Potential = GinzburgLandau()
    phi_star: float = 0.4
    clamp_phi: ClampRange = ClampRange()
    eta_min: float = 1e-3
    fh_delta: float = 1e-6

    def __post_init__(self):
        if not (0.0 <= self.kappa <= 1.0):
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")
        if self.eps <= 0 or self.c0 <= 0:
            raise ValueError("eps and c0 must be positive")
        if self.delta0 < 0:
            raise ValueError("delta0 must be nonnegative")
        if not (0.0 < self.clamp_phi.lower < self.clamp_phi.upper < 1.0):
            raise ValueError("clamp_phi must satisfy 0 < lower < upper < 1")


def _clamp(phi: ArrayLike, lo: float, hi: float) -> ArrayLike:
    return np.clip(phi, lo, hi)


# -- potentials ---------------------------------------------------------------

def potential_F(p: ModelParams, phi: ArrayLike) -> ArrayLike:
    """Potential energy density F(phi)."""
    pot = p.potential
    phi = np.asarray(phi, dtype=float)
    if isinstance(pot, GinzburgLandau):
        return pot.a_coef * phi**2 * (phi - 1.0) ** 2
    if isinstance(pot, ModifiedGinzburgLandau):
        return (phi - pot.a) ** 2 * (phi - pot.b) ** 2
    if isinstance(pot, FloryHuggins):
        c = _clamp(phi, p.fh_delta, 1.0 - p.fh_delta)
        return (c * np.log(c) / pot.n_p + (1.0 - c) * np.log(1.0 - c) / pot.n_s
                + pot.chi * c * (1.0 - c))
    raise TypeError(f"unknown potential {pot!r}")


def potential_f(p: ModelParams, phi: ArrayLike) -> ArrayLike:
    """First derivative F'(phi), the potential part of the chemical potential."""
    pot = p.potential
    phi = np.asarray(phi, dtype=float)
    if isinstance(pot, GinzburgLandau):
        return 2.0 * pot.a_coef * phi * (phi - 1.0) * (2.0 * phi - 1.0)
    if isinstance(pot, ModifiedGinzburgLandau):
        return 2.0 * (phi - pot.a) * (phi - pot.b) * (2.0 * phi - pot.a - pot.b)
    if isinstance(pot, FloryHuggins):
        c = _clamp(phi, p.fh_delta, 1.0 - p.fh_delta)
        return ((np.log(c) + 1.0) / pot.n_p - (np.log(1.0 - c) + 1.0) / pot.n_s
                + pot.chi * (1.0 - 2.0 * c))
    raise TypeError(f"unknown potential {pot!r}")


def potential_fprime(p: ModelParams, phi: ArrayLike) -> ArrayLike:
    """Second derivative F''(phi), used by the Taylor linearization."""
    pot = p.potential
    phi = np.asarray(phi, dtype=float)
    if isinstance(pot, GinzburgLandau):
        return 2.0 * pot.a_coef * (6.0 * phi**2 - 6.0 * phi + 1.0)
    if isinstance(pot, ModifiedGinzburgLandau):
        a, b = pot.a, pot.b
        return 2.0 * ((phi - b) * (2 * phi - a - b) + (phi - a) * (2 * phi - a - b)
                      + 2.0 * (phi - a) * (phi - b))
    if isinstance(pot, FloryHuggins):
        c = _clamp(phi, p.fh_delta, 1.0 - p.fh_delta)
        return 1.0 / (pot.n_p * c) + 1.0 / (pot.n_s * (1.0 - c)) - 2.0 * pot.chi
    raise TypeError(f"unknown potential {pot!r}")


def f_taylor(p: ModelParams, phi_old: ArrayLike, phi_new: ArrayLike) -> ArrayLike:
    """Linearized potential derivative f(old) + (new - old) f'(old) / 2.

    Affine in phi_new, which keeps the implicit step linear.
    """
    return potential_f(p, phi_old) + 0.5 * (np.asarray(phi_new) - np.asarray(phi_old)) * potential_fprime(p, phi_old)


# -- composition-dependent coefficients ---------------------------------------

@dataclass(frozen=True)
class Coefficients:
    """Evaluators for the composition-dependent model coefficients."""

    m: Callable[[ArrayLike], ArrayLike]
    n: Callable[[ArrayLike], ArrayLike]
    A: Callable[[ArrayLike], ArrayLike]
    A_prime: Callable[[ArrayLike], ArrayLike]
    tau: Callable[[ArrayLike], ArrayLike]
    h: Callable[[ArrayLike], ArrayLike]
    eta: Callable[[ArrayLike], ArrayLike]


def standard_coefficients(p: ModelParams) -> Coefficients:
    """Coefficient set used by all three experiments.

    m = phi^2 (1-phi)^2 and n = phi (1-phi) on raw phi, floored at 0;
    tau = 10 phi^2, h = 1/(5 phi^2) and the cot argument of A evaluated
    on phi clamped to [clamp.lower, 1 - clamp.lower]; eta = 1 - phi^2
    floored at eta_min.
    """
    lo = p.clamp_phi.lower
    hi = p.clamp_phi.upper
    cot_star = 1.0 / math.tan(math.pi * p.phi_star)

    def m(phi):
        phi = np.asarray(phi, dtype=float)
        return np.maximum(phi**2 * (1.0 - phi) ** 2, 0.0)

    def n(phi):
        phi = np.asarray(phi, dtype=float)
        return np.maximum(phi * (1.0 - phi), 0.0)

    def A(phi):
        c = _clamp(np.asarray(phi, dtype=float), lo, hi)
        return 1.5 + 0.5 * np.tanh(1e3 * (cot_star - 1.0 / np.tan(np.pi * c)))

    def A_prime(phi):
        c = _clamp(np.asarray(phi, dtype=float), lo, hi)
        z = 1e3 * (cot_star - 1.0 / np.tan(np.pi * c))
        sech2 = 1.0 / np.cosh(np.minimum(np.abs(z), 350.0)) ** 2
        return 0.5 * sech2 * 1e3 * np.pi / np.sin(np.pi * c) ** 2

    def tau(phi):
        c = _clamp(np.asarray(phi, dtype=float), lo, hi)
        return 10.0 * c**2

    def h(phi):
        c = _clamp(np.asarray(phi, dtype=float), lo, hi)
        return 1.0 / (5.0 * c**2)

    def eta(phi):
        phi = np.asarray(phi, dtype=float)
        return np.maximum(1.0 - phi**2, p.eta_min)

    return Coefficients(m=m, n=n, A=A, A_prime=A_prime, tau=tau, h=h, eta=eta)


_COEFF_TAGS = ("m", "n", "A", "A_prime", "tau", "h", "eta")


def eval_coefficient(c: Coefficients, which: str, phi: ArrayLike) -> ArrayLike:
    """Evaluate one named coefficient; total on finite input."""
    if which not in _COEFF_TAGS:
        raise KeyError(f"unknown coefficient {which!r}, expected one of {_COEFF_TAGS}")
    return getattr(c, which)(phi)


# -- experiment presets --------------------------------------------------------

@dataclass(frozen=True)
class InitialConditionSpec:
    """Initial data: mean composition with uniform nodal noise, bulk
    stress, velocity (callable over coordinates or zero), conformation
    components (c11, c12, c22)."""

    phi_mean: float = 0.4
    noise_amp: float = 1e-3
    q0: float = 0.0
    u0: Callable[[np.ndarray], np.ndarray] | None = None
    C0: tuple[float, float, float] = (math.sqrt(2.0), 0.0, math.sqrt(2.0))


def _rotating_disc_velocity(nodes: np.ndarray) -> np.ndarray:
    """Rigid rotation inside the ball of radius 50 around (64, 64)."""
    x = nodes[:, 0]
    y = nodes[:, 1]
    inside = (x - 64.0) ** 2 + (y - 64.0) ** 2 <= 50.0**2
    u = np.zeros_like(nodes)
    u[:, 0] = np.where(inside, (y - 64.0) / 128.0, 0.0)
    u[:, 1] = np.where(inside, (64.0 - x) / 128.0, 0.0)
    return u


def experiment_preset(preset_id: int) -> tuple[ModelParams, InitialConditionSpec]:
    """Canned parameter sets 1, 2, 3.

    1: shifted double well, quiescent start, isotropic stretched
       conformation sqrt(2) I.
    2: logarithmic potential (n_p = n_s = 1, chi = 28/11), C0 = I.
    3: preset-1 potential plus a rotating disc of fluid and an
       anisotropic C0 (diagonal 2, off-diagonal 0.5).
    """
    if preset_id == 1:
        params = ModelParams(potential=ModifiedGinzburgLandau())
        ics = InitialConditionSpec()
        return params, ics
    if preset_id == 2:
        params = ModelParams(potential=FloryHuggins())
        ics = InitialConditionSpec(C0=(1.0, 0.0, 1.0))
        return params, ics
    if preset_id == 3:
        params = ModelParams(potential=ModifiedGinzburgLandau())
        ics = InitialConditionSpec(u0=_rotating_disc_velocity, C0=(2.0, 0.5, 2.0))
        return params, ics
    raise ValueError(f"unknown experiment preset {preset_id}, expected 1, 2 or 3")
