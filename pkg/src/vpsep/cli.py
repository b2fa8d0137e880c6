"""Command-line entry point: run simulations, verify properties, resume.

`run` executes a configured simulation, `check` exercises the numeric
property suites (inequalities, gradients, equilibrium relaxation) and
exits nonzero if any fails, `resume` continues from a checkpoint.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config
from .diagnostics import check_korn_equality, check_trace_norm_inequality
from .mesh import build_rect_mesh
from .model import (FloryHuggins, GinzburgLandau, ModelParams,
                    ModifiedGinzburgLandau, potential_F, potential_f,
                    potential_fprime)
from .output import CheckpointError
from .simulation import RunSummary, resume_simulation, run_simulation
from .step_nsp import conformation_equilibrium


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vpsep",
        description="Finite-element simulator for viscoelastic phase "
                    "separation of polymer-solvent mixtures.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a configured simulation")
    run_p.add_argument("--config", type=Path, default=None,
                       help="key=value config file")
    run_p.add_argument("--experiment", type=int, default=None)
    run_p.add_argument("--nx", type=int, default=None)
    run_p.add_argument("--ny", type=int, default=None)
    run_p.add_argument("--dt", type=float, default=None)
    run_p.add_argument("--t-end", dest="t_end", type=float, default=None)
    run_p.add_argument("--out", dest="output_dir", default=None)
    run_p.add_argument("--seed", type=int, default=None)

    sub.add_parser("check", help="run the numeric property suites")

    res_p = sub.add_parser("resume", help="continue from a checkpoint")
    res_p.add_argument("--checkpoint", type=Path, required=True)
    res_p.add_argument("--t-end", dest="t_end", type=float, default=None)
    res_p.add_argument("--out", dest="output_dir", default=None)
    return parser


def _print_summary(summary: RunSummary) -> None:
    print(f"steps completed : {summary.steps_completed}")
    print(f"final time      : {summary.t_final:g}")
    print(f"wall time       : {summary.wall_time:.2f} s")
    print(f"max positive dE : {summary.max_positive_dE:.3e}")
    print(f"mass drift      : {summary.mass_drift:.3e}")
    slow = (f" ({summary.fp_slow_steps} steps above 10)"
            if summary.fp_slow_steps else "")
    print(f"max fixed-point iterations : {summary.fp_iters_max}{slow}")
    if summary.alg_bound_violations:
        print(f"algebraic energy bound violations : "
              f"{summary.alg_bound_violations}")
    print(f"output          : {summary.output_dir}")
    if summary.last_checkpoint:
        print(f"last checkpoint : {summary.last_checkpoint}")
    if summary.aborted:
        print(f"ABORTED: {summary.abort_message}")


def _cmd_run(args) -> int:
    text = args.config.read_text() if args.config is not None else ""
    overrides = {}
    for key in ("experiment", "nx", "ny", "dt", "t_end", "output_dir",
                "seed"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    summary = run_simulation(parse_config(text, overrides=overrides))
    _print_summary(summary)
    return 1 if summary.aborted else 0


def _cmd_resume(args) -> int:
    summary = resume_simulation(args.checkpoint, t_end=args.t_end,
                                output_dir=args.output_dir)
    _print_summary(summary)
    return 1 if summary.aborted else 0


def _gradient_error(params: ModelParams) -> float:
    # central differences of F against f and of f against f'
    phi = np.linspace(0.05, 0.95, 19)
    h = 1e-5
    fd_f = (potential_F(params, phi + h) - potential_F(params, phi - h)) / (2 * h)
    fd_fp = (potential_f(params, phi + h) - potential_f(params, phi - h)) / (2 * h)
    err_f = np.abs(fd_f - potential_f(params, phi))
    err_fp = np.abs(fd_fp - potential_fprime(params, phi))
    scale_f = np.maximum(np.abs(potential_f(params, phi)), 1.0)
    scale_fp = np.maximum(np.abs(potential_fprime(params, phi)), 1.0)
    return float(max((err_f / scale_f).max(), (err_fp / scale_fp).max()))


def _cmd_check(_args) -> int:
    failures = 0

    def report(ok: bool, label: str, detail: str) -> None:
        nonlocal failures
        if not ok:
            failures += 1
        print(f"{'PASS' if ok else 'FAIL'} {label} ({detail})")

    mesh = build_rect_mesh(6, 6, 1.0, 1.0)
    for p in (2, 4):
        rep = check_trace_norm_inequality(mesh, 200, p=p, seed=0)
        report(rep.violations == 0 and rep.max_ratio <= 1.0 + 1e-12,
               f"trace-norm inequality p={p}",
               f"{rep.n_samples} fields, max ratio {rep.max_ratio:.3f}")

    korn_mesh = build_rect_mesh(48, 48, 1.0, 1.0)
    x, y = korn_mesh.nodes[:, 0], korn_mesh.nodes[:, 1]
    for k, l in ((1, 1), (2, 1), (1, 2)):
        u = np.stack([l * np.pi * np.sin(k * np.pi * x) * np.cos(l * np.pi * y),
                      -k * np.pi * np.cos(k * np.pi * x) * np.sin(l * np.pi * y)],
                     axis=1)
        rep = check_korn_equality(korn_mesh, u)
        report(rep.relative_difference <= 5e-3,
               f"korn equality, stream mode ({k},{l})",
               f"relative gap {rep.relative_difference:.2e}")

    potentials = [("double well", ModelParams(potential=GinzburgLandau())),
                  ("shifted double well",
                   ModelParams(potential=ModifiedGinzburgLandau())),
                  ("logarithmic", ModelParams(potential=FloryHuggins()))]
    for name, params in potentials:
        err = _gradient_error(params)
        report(err <= 1e-6, f"potential gradient check, {name}",
               f"max relative error {err:.2e}")

    C = conformation_equilibrium(h_val=1.25, dt=0.1,
                                 c0_scalar=float(np.sqrt(2.0)), n_steps=2000)
    target = 1.0 / np.sqrt(2.0)
    gap = float(max(abs(C[0] - target), abs(C[1]), abs(C[2] - target)))
    report(gap <= 1e-6, "conformation equilibrium relaxation",
           f"distance to fixed point {gap:.2e}")

    return 1 if failures else 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        return _cmd_resume(args)
    except (ConfigError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
