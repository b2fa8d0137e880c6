"""Time-stepping driver: operator-split advance with periodic output.

Each step traces the characteristic feet of the current velocity, advances
the phase field / bulk stress / chemical potential block, then advances
velocity, pressure, and conformation through the lagged fixed-point pass.
Diagnostics are appended to the energy CSV on their own cadence; field
snapshots and restart checkpoints on another. Everything the continuation
of a run depends on is carried inside the checkpoint, so a restart from
step k reproduces the uninterrupted trajectory bitwise.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path

from .config import ConfigError, RunConfig, resolve_model
from .diagnostics import elastic_source_rate, energy_components
from .fields import State, make_initial_state
from .mesh import build_rect_mesh
from .model import standard_coefficients
from .output import (append_energy_csv, load_checkpoint, write_checkpoint,
                     write_fields_vtk)
from .sparse import SolverOptions
from .step_ch import step1_advance
from .step_nsp import Step2Options, step2_advance

# fixed-point counts above this are reported as slow in the run summary
FP_FLAG_THRESHOLD = 10


@dataclass
class RunSummary:
    """Final accounting of a simulation run."""

    steps_completed: int
    t_final: float
    wall_time: float
    max_positive_dE: float
    mass_drift: float
    fp_iters_max: int
    fp_slow_steps: int
    alg_bound_violations: int
    output_dir: str
    last_checkpoint: str
    aborted: bool = False
    abort_message: str = ""


def _solver_options(config: RunConfig) -> SolverOptions:
    return SolverOptions(tol=config.tol, max_iter=config.max_iter,
                         direct_threshold=config.direct_threshold)


def _step2_options(config: RunConfig) -> Step2Options:
    return Step2Options(tol_fp=config.tol_fp, max_fp=config.max_fp,
                        direct_threshold=config.step2_direct_threshold)


def _n_steps(config: RunConfig) -> int:
    n = int(round(config.t_end / config.dt))
    if n < 1:
        raise ConfigError("t_end shorter than a single step")
    return n


def run_simulation(config: RunConfig) -> RunSummary:
    """Run from a fresh seeded initial state to t_end."""
    mesh = build_rect_mesh(config.nx, config.ny, config.Lx, config.Ly)
    params, ics = resolve_model(config)
    state = make_initial_state(mesh, ics, config.seed)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_fields_vtk(state, mesh, out_dir / f"fields_{state.step:06d}.vtk")

    report0 = energy_components(mesh, state, params)
    trackers = {
        "baseline_mass": report0.mass,
        "baseline_E_alg": report0.E_alg,
        "prev_E_tot": report0.E_tot,
        "last_row_E_tot": report0.E_tot,
        "source_accum": 0.0,
        "max_positive_dE": 0.0,
        "fp_iters_max": 0,
        "fp_slow_steps": 0,
        "alg_bound_violations": 0,
        "last_checkpoint": "",
    }
    return _advance(mesh, params, state, config, trackers)


def resume_simulation(checkpoint_path, t_end: float | None = None,
                      output_dir=None) -> RunSummary:
    """Continue a checkpointed run, optionally extending it or relocating output."""
    state, config, trackers = load_checkpoint(checkpoint_path)
    trackers["last_checkpoint"] = str(checkpoint_path)
    if t_end is not None:
        config = dataclasses.replace(config, t_end=float(t_end))
    if output_dir is not None:
        config = dataclasses.replace(config, output_dir=str(output_dir))
    mesh = build_rect_mesh(config.nx, config.ny, config.Lx, config.Ly)
    params, _ = resolve_model(config)
    Path(config.output_dir).mkdir(parents=True, exist_ok=True)
    return _advance(mesh, params, state, config, trackers)


def _advance(mesh, params, state: State, config: RunConfig,
             trackers: dict) -> RunSummary:
    coeffs = standard_coefficients(params)
    solver_opts = _solver_options(config)
    step2_opts = _step2_options(config)
    n_steps = _n_steps(config)
    out_dir = Path(config.output_dir)
    csv_path = out_dir / "energy.csv"

    prev_E_tot = trackers["prev_E_tot"]
    last_row_E_tot = trackers["last_row_E_tot"]
    baseline_mass = trackers["baseline_mass"]
    baseline_E_alg = trackers["baseline_E_alg"]
    source_accum = trackers["source_accum"]
    max_pos_dE = trackers["max_positive_dE"]
    fp_iters_max = int(trackers["fp_iters_max"])
    fp_slow = int(trackers["fp_slow_steps"])
    alg_violations = int(trackers["alg_bound_violations"])
    last_checkpoint = trackers["last_checkpoint"]

    t0 = time.perf_counter()
    report = None

    def summary(aborted=False, message=""):
        return RunSummary(
            steps_completed=state.step,
            t_final=state.t,
            wall_time=time.perf_counter() - t0,
            max_positive_dE=max_pos_dE,
            mass_drift=(report.mass - baseline_mass) if report is not None
            else 0.0,
            fp_iters_max=fp_iters_max,
            fp_slow_steps=fp_slow,
            alg_bound_violations=alg_violations,
            output_dir=str(out_dir),
            last_checkpoint=last_checkpoint,
            aborted=aborted,
            abort_message=message,
        )

    while state.step < n_steps:
        try:
            phi_new, q_new, mu_half = step1_advance(
                mesh, state, params, config.dt, coeffs=coeffs,
                solver_opts=solver_opts)
            if config.disable_flow:
                u_new, p_new, C_new, fp_iters = state.u, state.p, state.C, 0
            else:
                u_new, p_new, C_new, fp_report = step2_advance(
                    mesh, state, params, config.dt, phi_new, mu_half,
                    coeffs=coeffs, solver_opts=solver_opts,
                    step2_opts=step2_opts)
                fp_iters = fp_report.iterations
        except RuntimeError as exc:
            return summary(aborted=True,
                           message=f"step {state.step + 1}: {exc}")

        state = State(t=state.t + config.dt, step=state.step + 1,
                      phi=phi_new, q=q_new, mu=mu_half,
                      u=u_new, p=p_new, C=C_new)

        report = energy_components(mesh, state, params, dt=config.dt)
        report.dE = report.E_tot - prev_E_tot
        prev_E_tot = report.E_tot
        max_pos_dE = max(max_pos_dE, report.dE)
        fp_iters_max = max(fp_iters_max, fp_iters)
        if fp_iters > FP_FLAG_THRESHOLD:
            fp_slow += 1

        source_accum += config.dt * elastic_source_rate(mesh, state.phi,
                                                        state.C, coeffs)
        bound = baseline_E_alg + 0.5 * source_accum
        if report.E_alg > bound + 1e-10 * max(1.0, abs(baseline_E_alg)):
            alg_violations += 1

        if state.step % config.energy_every == 0 or state.step == n_steps:
            append_energy_csv(report, csv_path, step=state.step,
                              mass_drift=report.mass - baseline_mass,
                              fp_iters=fp_iters,
                              dE=report.E_tot - last_row_E_tot)
            last_row_E_tot = report.E_tot

        if state.step % config.output_every == 0 or state.step == n_steps:
            write_fields_vtk(state, mesh,
                             out_dir / f"fields_{state.step:06d}.vtk")
            trackers_out = {
                "baseline_mass": baseline_mass,
                "baseline_E_alg": baseline_E_alg,
                "prev_E_tot": prev_E_tot,
                "last_row_E_tot": last_row_E_tot,
                "source_accum": source_accum,
                "max_positive_dE": max_pos_dE,
                "fp_iters_max": fp_iters_max,
                "fp_slow_steps": fp_slow,
                "alg_bound_violations": alg_violations,
                "last_checkpoint": last_checkpoint,
            }
            ckpt = out_dir / f"checkpoint_{state.step:06d}.npz"
            write_checkpoint(ckpt, state, config, extras=trackers_out)
            last_checkpoint = str(ckpt)

    return summary()
