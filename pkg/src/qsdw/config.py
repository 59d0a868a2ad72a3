"""
Strict loading of experiment configuration files.

Configs are TOML (or the JSON written as ``resolved_config.json``, so a run
can be replayed from its own output). Every table and key is checked against
the schema below; a misspelled key is an error.

Example::

    experiment = "dissipativity"

    [equation]
    family = "main"
    p = 3.0
    q = 2.0

    [grid]
    N = 64

    [time]
    dt = 1e-3
    T = 2.0
    cadence = 10

    [initial]
    preset = "smooth"
    u_amplitudes = [1.0]

    [dissipativity]
    energy_slack = 1e-10
"""
from __future__ import annotations

import copy
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiments import (EXPERIMENTS, OPTION_DEFAULTS, PRESET_PARAMS, EquationConfig,
                          ExperimentConfig, ForcingConfig, GridConfig, InitialConfig,
                          TimeConfig, build_setup, validate_config)

__all__ = ["ConfigError", "load_config", "config_from_dict", "resolved_dict"]

_NUM = (int, float)
_SECTIONS = {
    "equation": (EquationConfig, {
        "family": str, "gamma": _NUM, "alpha": _NUM, "p": _NUM, "q": _NUM, "C_f": _NUM,
        "phi_kind": str, "f_kind": str, "kirchhoff_m": _NUM, "kirchhoff_coeff": _NUM,
        "limit_case_p5": bool,
    }),
    "forcing": (ForcingConfig, {"kind": str, "k": (int, list), "amplitude": _NUM}),
    "grid": (GridConfig, {"dim": int, "N": int, "M": (int, type(None)),
                          "lengths": (list, *_NUM)}),
    "time": (TimeConfig, {"dt": _NUM, "T": _NUM, "cadence": int, "scheme": str,
                          "tol": _NUM, "max_iter": int}),
}


class ConfigError(ValueError):
    """Malformed or out-of-contract configuration."""


def _check_type(where, value, types):
    types = types if isinstance(types, tuple) else (types,)
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{where}: expected {_names(types)}, got a boolean")
    if not isinstance(value, types):
        raise ConfigError(f"{where}: expected {_names(types)}, got {type(value).__name__}")


def _names(types):
    return " or ".join(sorted({t.__name__ for t in types}))


def _section(raw, name, cls, schema):
    table = raw.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(table) - set(schema)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    for key, value in table.items():
        _check_type(f"{name}.{key}", value, schema[key])
    obj = cls(**table)
    if name == "time":
        obj.dt, obj.T, obj.tol = float(obj.dt), float(obj.T), float(obj.tol)
    if name == "grid" and not isinstance(obj.lengths, list):
        obj.lengths = [obj.lengths]
    return obj


def _initial(raw):
    table = dict(raw.get("initial", {}))
    if not isinstance(raw.get("initial", {}), dict):
        raise ConfigError("[initial] must be a table")
    preset = table.pop("preset", "smooth")
    seed = table.pop("seed", None)
    _check_type("initial.preset", preset, str)
    if seed is not None:
        _check_type("initial.seed", seed, int)
    if preset not in PRESET_PARAMS:
        raise ConfigError(f"initial.preset: unknown preset {preset!r}; "
                          f"expected one of {sorted(PRESET_PARAMS)}")
    unknown = set(table) - set(PRESET_PARAMS[preset])
    if unknown:
        raise ConfigError(f"unknown key(s) in [initial] for preset {preset!r}: "
                          f"{', '.join(sorted(unknown))}")
    return InitialConfig(preset, seed, table)


def config_from_dict(raw):
    """Build an :class:`ExperimentConfig` from a parsed document, strictly."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table")
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {sorted(EXPERIMENTS)}, got {exp!r}")
    allowed = {"experiment", "initial", *_SECTIONS, *EXPERIMENTS}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    stray = [k for k in EXPERIMENTS if k in raw and k != exp]
    if stray:
        raise ConfigError(f"options table [{stray[0]}] does not match experiment {exp!r}")
    parts = {name: _section(raw, name, cls, schema)
             for name, (cls, schema) in _SECTIONS.items()}
    options = raw.get(exp, {})
    if not isinstance(options, dict):
        raise ConfigError(f"[{exp}] must be a table")
    unknown = set(options) - set(OPTION_DEFAULTS[exp])
    if unknown:
        raise ConfigError(f"unknown key(s) in [{exp}]: {', '.join(sorted(unknown))}")
    return ExperimentConfig(exp, initial=_initial(raw), options=dict(options), **parts)


def load_config(path, seed=None):
    """Read, parse and fully validate the config at ``path``.

    ``seed`` overrides ``initial.seed``. All preconditions of the basis,
    equation, initial data and experiment options are checked here, before
    any integration.
    """
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        if path.suffix == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    config = config_from_dict(raw)
    if seed is not None:
        config.initial.seed = int(seed)
    try:
        validate_config(config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def resolved_dict(config):
    """The config with every default filled in, in the file schema layout."""
    basis, _ = build_setup(config)
    out = {"experiment": config.experiment}
    for name in _SECTIONS:
        out[name] = asdict(getattr(config, name))
    out["grid"]["M"] = basis.M
    out["grid"]["lengths"] = list(basis.lengths)
    initial = {"preset": config.initial.preset}
    if config.initial.seed is not None:
        initial["seed"] = config.initial.seed
    initial.update(config.initial.resolved())
    out["initial"] = {k: v for k, v in initial.items() if v is not None}
    opts = copy.deepcopy(OPTION_DEFAULTS[config.experiment])
    opts.update(config.options)
    out[config.experiment] = {k: v for k, v in opts.items() if v is not None}
    return _plain(out)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj

