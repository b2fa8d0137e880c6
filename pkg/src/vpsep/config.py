"""Run configuration: key=value parsing, validation, and canonical dumps.

A config file is a list of `key=value` lines with `#` comments. Every key
is checked against the known set and its value against the allowed range,
so a typo fails loudly with its line number instead of silently running
the wrong experiment. Command-line overrides pass through the same
converters and checks, labeled "command line" in errors.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

from .model import InitialConditionSpec, ModelParams, experiment_preset


class ConfigError(ValueError):
    """Malformed, unknown, or out-of-range configuration input."""


@dataclass
class RunConfig:
    experiment: int = 1
    nx: int = 64
    ny: int = 64
    Lx: float = 64.0
    Ly: float = 64.0
    dt: float = 0.1
    t_end: float = 10.0
    output_every: int = 50
    energy_every: int = 1
    output_dir: str = "out"
    seed: int = 0
    tol: float = 1e-10
    max_iter: int = 5000
    direct_threshold: int = 30_000
    tol_fp: float = 1e-8
    max_fp: int = 50
    step2_direct_threshold: int = 12_000
    kappa: float | None = None    # preset override when set
    delta0: float | None = None   # preset override when set
    disable_flow: bool = False
    # programmatic escape hatches; win over the preset id, not serializable
    params: ModelParams | None = None
    ics: InitialConditionSpec | None = None


def _parse_bool(raw: str) -> bool:
    low = str(raw).strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _check_experiment(v: int) -> bool:
    try:
        experiment_preset(v)
    except Exception:
        return False
    return True


# key -> (converter, range predicate, range description)
_SCHEMA = {
    "experiment": (int, _check_experiment, "a known preset id"),
    "nx": (int, lambda v: v >= 1, ">= 1"),
    "ny": (int, lambda v: v >= 1, ">= 1"),
    "Lx": (float, lambda v: v > 0, "> 0"),
    "Ly": (float, lambda v: v > 0, "> 0"),
    "dt": (float, lambda v: v > 0, "> 0"),
    "t_end": (float, lambda v: v > 0, "> 0"),
    "output_every": (int, lambda v: v >= 1, ">= 1"),
    "energy_every": (int, lambda v: v >= 1, ">= 1"),
    "output_dir": (str, lambda v: len(v) > 0, "non-empty"),
    "seed": (int, lambda v: True, "any integer"),
    "tol": (float, lambda v: v > 0, "> 0"),
    "max_iter": (int, lambda v: v >= 1, ">= 1"),
    "direct_threshold": (int, lambda v: v >= 0, ">= 0"),
    "tol_fp": (float, lambda v: v > 0, "> 0"),
    "max_fp": (int, lambda v: v >= 1, ">= 1"),
    "step2_direct_threshold": (int, lambda v: v >= 0, ">= 0"),
    "kappa": (float, lambda v: v >= 0, ">= 0"),
    "delta0": (float, lambda v: v >= 0, ">= 0"),
    "disable_flow": (_parse_bool, lambda v: True, "a boolean"),
}


def _assign(values: dict, key: str, raw, where: str) -> None:
    if key not in _SCHEMA:
        raise ConfigError(f"{where}: unknown key {key!r}")
    convert, in_range, describe = _SCHEMA[key]
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        value = raw if convert is str and isinstance(raw, str) else convert(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from None
    if not in_range(value):
        raise ConfigError(f"{where}: {key}={value!r} out of range "
                          f"(must be {describe})")
    values[key] = value


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse key=value text, then apply command-line overrides on top."""
    values: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got "
                              f"{raw_line.strip()!r}")
        key, raw = line.split("=", 1)
        _assign(values, key.strip(), raw.strip(), f"line {lineno}")
    for key, raw in (overrides or {}).items():
        _assign(values, key, raw, "command line")
    return RunConfig(**values)


def resolve_model(config: RunConfig) -> tuple[ModelParams, InitialConditionSpec]:
    """Model parameters and initial conditions implied by a config."""
    if config.params is not None:
        params = config.params
        ics = config.ics if config.ics is not None else InitialConditionSpec()
    else:
        params, ics = experiment_preset(config.experiment)
        if config.ics is not None:
            ics = config.ics
    replacements = {}
    if config.kappa is not None:
        replacements["kappa"] = config.kappa
    if config.delta0 is not None:
        replacements["delta0"] = config.delta0
    if replacements:
        params = dataclasses.replace(params, **replacements)
    return params, ics


def config_to_text(config: RunConfig) -> str:
    """Canonical key=value dump, the checkpoint's embedded configuration."""
    if config.params is not None or config.ics is not None:
        raise ConfigError("explicit parameter objects cannot be serialized; "
                          "use a preset id with kappa/delta0 overrides")
    lines = []
    for f in dataclasses.fields(RunConfig):
        if f.name in ("params", "ics"):
            continue
        value = getattr(config, f.name)
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = format(value, ".17g")
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    """Stable digest of the canonical dump."""
    return hashlib.sha256(config_to_text(config).encode()).hexdigest()
