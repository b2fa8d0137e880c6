"""Finite element simulation of viscoelastic phase separation.

A 2D solver for polymer-solvent demixing: a Cahn-Hilliard phase field
coupled to a scalar bulk stress, an incompressible flow field with
pressure stabilization, and a conformation tensor with trace-dependent
relaxation. Time stepping is an operator split with semi-Lagrangian
treatment of advection; energy and mass balances are tracked as
first-class diagnostics.
"""

__version__ = "0.1.0"

from .config import ConfigError, RunConfig, parse_config, resolve_model
from .diagnostics import (EnergyReport, KornReport, TraceNormReport,
                          check_korn_equality, check_trace_norm_inequality,
                          energy_components, mass, mass_drift)
from .fields import (State, at_quad, element_gradients, eval_at, integrate,
                     integrate_nodal, make_initial_state, mean, minmax,
                     quad_coords)
from .mesh import Mesh, build_rect_mesh, element_geometry, locate_point
from .model import (Coefficients, FloryHuggins, GinzburgLandau,
                    InitialConditionSpec, ModelParams,
                    ModifiedGinzburgLandau, experiment_preset,
                    potential_F, potential_f, potential_fprime,
                    standard_coefficients)
from .output import (append_energy_csv, load_checkpoint, write_checkpoint,
                     write_fields_vtk)
from .semilag import cfl_number, compute_feet, transport, transport_many
from .simulation import RunSummary, resume_simulation, run_simulation
from .sparse import SolveReport, SolverOptions, SparseMatrix, solve
from .step_ch import step1_advance
from .step_nsp import (FixedPointReport, Step2Options,
                       conformation_equilibrium, step2_advance)
from .studies import mms_phase_field_study, transport_translation_study

__all__ = [
    "Mesh", "build_rect_mesh", "element_geometry", "locate_point",
    "SparseMatrix", "SolveReport", "SolverOptions", "solve",
    "ModelParams", "Coefficients", "InitialConditionSpec",
    "GinzburgLandau", "ModifiedGinzburgLandau", "FloryHuggins",
    "potential_F", "potential_f", "potential_fprime",
    "standard_coefficients", "experiment_preset",
    "State", "make_initial_state", "eval_at", "at_quad", "quad_coords",
    "integrate", "integrate_nodal", "mean", "minmax", "element_gradients",
    "compute_feet", "transport", "transport_many", "cfl_number",
    "step1_advance", "step2_advance", "Step2Options", "FixedPointReport",
    "conformation_equilibrium",
    "EnergyReport", "TraceNormReport", "KornReport", "energy_components",
    "mass", "mass_drift", "check_trace_norm_inequality",
    "check_korn_equality",
    "RunConfig", "ConfigError", "parse_config", "resolve_model",
    "write_fields_vtk", "append_energy_csv", "write_checkpoint",
    "load_checkpoint",
    "run_simulation", "resume_simulation", "RunSummary",
    "mms_phase_field_study", "transport_translation_study",
]
