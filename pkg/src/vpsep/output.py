"""Field snapshots, the energy time series, and binary checkpoints.

Snapshots are legacy ASCII VTK unstructured grids (triangle cells), which
every standard viewer loads without extra libraries. The energy series is
a flat CSV with 17 significant digits so runs can be compared bitwise.
Checkpoints are npz archives carrying every nodal field at full precision
plus the canonical config dump and its hash; a restart therefore either
reproduces the original trajectory exactly or refuses to start.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .config import RunConfig, config_to_text, parse_config
from .fields import State
from .mesh import Mesh

CSV_HEADER = ("step,t,E_mix,E_bulk,E_kin,E_el,E_alg,E_tot,"
              "mass,mass_drift,dE,spd_fraction,cfl,fp_iters")


class CheckpointError(RuntimeError):
    """Unreadable, corrupted, or mismatched checkpoint archive."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_fields_vtk(state: State, mesh: Mesh, path) -> None:
    """Write one snapshot with all nodal fields to a legacy VTK file."""
    N = mesh.n_nodes
    out = []
    out.append("# vtk DataFile Version 3.0")
    out.append(f"phase separation fields at t={_fmt(state.t)}")
    out.append("ASCII")
    out.append("DATASET UNSTRUCTURED_GRID")
    out.append(f"POINTS {N} double")
    for x, y in mesh.nodes:
        out.append(f"{_fmt(x)} {_fmt(y)} 0")
    out.append(f"CELLS {mesh.n_elements} {4 * mesh.n_elements}")
    for a, b, c in mesh.elements:
        out.append(f"3 {a} {b} {c}")
    out.append(f"CELL_TYPES {mesh.n_elements}")
    out.extend("5" for _ in range(mesh.n_elements))
    out.append(f"POINT_DATA {N}")
    for name, values in (("phi", state.phi), ("q", state.q),
                         ("mu", state.mu), ("p", state.p)):
        out.append(f"SCALARS {name} double 1")
        out.append("LOOKUP_TABLE default")
        out.extend(_fmt(v) for v in values)
    out.append("VECTORS u double")
    for ux, uy in state.u:
        out.append(f"{_fmt(ux)} {_fmt(uy)} 0")
    out.append("TENSORS C double")
    for c11, c12, c22 in state.C:
        out.append(f"{_fmt(c11)} {_fmt(c12)} 0")
        out.append(f"{_fmt(c12)} {_fmt(c22)} 0")
        out.append("0 0 0")
    Path(path).write_text("\n".join(out) + "\n")


def append_energy_csv(report, path, step: int, mass_drift: float,
                      fp_iters: int, dE: float | None = None) -> None:
    """Append one diagnostic row, creating the header on first use.

    dE defaults to the report's one-step difference; passing it explicitly
    lets the caller chain differences between written rows when the energy
    cadence is coarser than the step.
    """
    path = Path(path)
    d_value = report.dE if dE is None else dE
    row = ",".join([
        str(int(step)), _fmt(report.t), _fmt(report.E_mix),
        _fmt(report.E_bulk), _fmt(report.E_kin), _fmt(report.E_el),
        _fmt(report.E_alg), _fmt(report.E_tot), _fmt(report.mass),
        _fmt(mass_drift), _fmt(d_value), _fmt(report.spd_fraction),
        _fmt(report.cfl), str(int(fp_iters)),
    ])
    new_file = not path.exists()
    with open(path, "a") as fh:
        if new_file:
            fh.write(CSV_HEADER + "\n")
        fh.write(row + "\n")


def write_checkpoint(path, state: State, config: RunConfig,
                     extras: dict | None = None) -> None:
    """Save all nodal fields plus the serialized config and its hash."""
    cfg_text = config_to_text(config)
    cfg_hash = hashlib.sha256(cfg_text.encode()).hexdigest()
    rng_state = json.dumps(np.random.default_rng(config.seed)
                           .bit_generator.state)
    np.savez(path,
             t=np.float64(state.t), step=np.int64(state.step),
             phi=state.phi, q=state.q, mu=state.mu,
             u=state.u, p=state.p, C=state.C,
             config_text=np.array(cfg_text),
             config_hash=np.array(cfg_hash),
             rng_state=np.array(rng_state),
             extras=np.array(json.dumps(extras or {})))


def load_checkpoint(path) -> tuple[State, RunConfig, dict]:
    """Load a checkpoint, verifying the embedded config against its hash."""
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    cfg_text = str(data["config_text"])
    cfg_hash = str(data["config_hash"])
    if hashlib.sha256(cfg_text.encode()).hexdigest() != cfg_hash:
        raise CheckpointError("config hash mismatch: checkpoint corrupted "
                              "or edited")
    config = parse_config(cfg_text)
    state = State(t=float(data["t"]), step=int(data["step"]),
                  phi=data["phi"], q=data["q"], mu=data["mu"],
                  u=data["u"], p=data["p"], C=data["C"])
    extras = json.loads(str(data["extras"])) if "extras" in data else {}
    return state, config, extras
