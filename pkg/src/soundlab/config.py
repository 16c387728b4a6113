"""Experiment configuration: JSON documents validated against per-experiment schemas.

Precedence, highest first: command-line flags (``--out``, ``--seed``), keys in
the config document, built-in defaults.  Resolution never touches the
numerics beyond cheap construction checks, so every config error surfaces
before any compute starts.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

import jsonschema

EXPERIMENTS = ("dispersion", "soundspeed", "linearize", "manybody-converge", "instability", "evolve")


class ConfigError(ValueError):
    """The configuration is malformed or describes an impossible run."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}


def _one_or_many(item: dict) -> dict:
    return {"oneOf": [item, {"type": "array", "items": item, "minItems": 1}]}


_GRID = {
    "type": "object",
    "properties": {
        "dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "n": {"type": "integer", "minimum": 2},
        "resolution": _pos,
        "L": _one_or_many(_pos),
    },
    "required": ["L"],
    "additionalProperties": False,
}

_POTENTIAL = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["bump", "zero"]},
        "strength": _one_or_many(_pos),
        "range": _pos,
        "sign": {"enum": [-1, 1]},
    },
    "additionalProperties": False,
}

_EXCITATION = {
    "type": "object",
    "properties": {
        "amplitude": _one_or_many(_nonneg),
        "width": _pos,
        "shape": {"enum": ["smooth-bump", "gaussian-bump"]},
        "noise": _nonneg,
    },
    "required": ["amplitude", "width"],
    "additionalProperties": False,
}

_COMMON = {
    "experiment": {"enum": list(EXPERIMENTS)},
    "grid": _GRID,
    "potential": _POTENTIAL,
    "excitation": _EXCITATION,
    "mode": {"enum": ["torus", "plateau"]},
    "kinetic": {"enum": ["spectral", "lattice"]},
    "dt": _pos,
    "t_end": _nonneg,
    "sample_interval": _pos,
    "seed": {"type": "integer", "minimum": 0},
    "output_dir": {"type": "string", "minLength": 1},
    "workers": {"type": "integer", "minimum": 1},
}

_EXTRA = {
    "dispersion": {
        "integrator": {"enum": ["split-step", "closed-form"]},
        "initial_width": _pos,
        "modes": {"type": "integer", "minimum": 1},
        "min_samples_per_period": _pos,
    },
    "soundspeed": {
        "initial_width": _pos,
        "fit_modes": {"type": "integer", "minimum": 2},
    },
    "linearize": {},
    "manybody-converge": {"rho": _one_or_many(_pos)},
    "instability": {
        "blowup_threshold": _pos,
        "collapse_threshold": _pos,
    },
    "evolve": {
        "cutoffs": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
        "direct_epsilon": {"type": "boolean"},
    },
}

_REQUIRED = {
    "dispersion": ["grid", "potential", "t_end", "sample_interval"],
    "soundspeed": ["grid", "potential", "t_end", "sample_interval"],
    "linearize": ["grid", "potential", "excitation", "t_end"],
    "manybody-converge": ["grid", "potential", "excitation", "rho", "t_end", "sample_interval"],
    "instability": ["grid", "potential", "excitation", "t_end", "sample_interval"],
    "evolve": ["grid", "potential", "excitation", "t_end", "sample_interval"],
}

_DEFAULTS: dict[str, dict[str, Any]] = {
    "dispersion": {"integrator": "split-step", "initial_width": 1.0, "min_samples_per_period": 8.0},
    "soundspeed": {"initial_width": 1.0, "fit_modes": 3},
    "linearize": {},
    "manybody-converge": {"kinetic": "lattice"},
    "instability": {"blowup_threshold": 1e6, "collapse_threshold": 1.0},
    "evolve": {"cutoffs": [0.25, 0.5], "direct_epsilon": False},
}

_COMMON_DEFAULTS = {"mode": "torus", "kinetic": "spectral", "seed": 0, "workers": 1}


def schema(experiment: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    return {
        "type": "object",
        "properties": {**_COMMON, **_EXTRA[experiment]},
        "required": _REQUIRED[experiment],
        "additionalProperties": False,
    }


def load(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def grid_sizes(grid_cfg: Mapping[str, Any]) -> list[tuple[int, float]]:
    """``(n, L)`` for every box in the scan."""
    out = []
    for L in as_list(grid_cfg["L"]):
        if "n" in grid_cfg:
            n = int(grid_cfg["n"])
        else:
            n_real = grid_cfg["resolution"] * L
            n = int(round(n_real))
            if abs(n - n_real) > 1e-9 * max(1.0, n_real):
                raise ConfigError(f"resolution * L = {n_real} is not an integer for L={L}")
        if n < 2 or n % 2:
            raise ConfigError(f"points per axis must be even and >= 2, got n={n} for L={L}")
        out.append((n, float(L)))
    return out


def _whole(span: float, dt: float) -> bool:
    steps = round(span / dt)
    return abs(steps * dt - span) <= 1e-9 * max(1.0, span)


def _semantic_checks(cfg: dict) -> None:
    exp = cfg["experiment"]
    g = cfg["grid"]
    if ("n" in g) == ("resolution" in g):
        raise ConfigError("grid needs exactly one of 'n' or 'resolution'")
    sizes = grid_sizes(g)
    pot = cfg["potential"]
    kind = pot["kind"]
    if kind == "bump":
        for key in ("strength", "range"):
            if key not in pot:
                raise ConfigError(f"bump potential needs '{key}'")
        for n, L in sizes:
            if not pot["range"] < L / 2:
                raise ConfigError(f"potential range {pot['range']} must be below L/2 = {L / 2}")
    if isinstance(pot.get("strength"), list) and exp != "instability":
        raise ConfigError("a list of potential strengths is only accepted by 'instability'")

    exc = cfg.get("excitation")
    if exc is not None:
        if isinstance(exc["amplitude"], list) and exp != "linearize":
            raise ConfigError("a list of amplitudes is only accepted by 'linearize'")
        for n, L in sizes:
            if not exc["width"] < L / 8:
                raise ConfigError(f"excitation width {exc['width']} must be below L/8 = {L / 8}")

    dt = cfg.get("dt")
    if dt is not None:
        if not _whole(cfg["t_end"], dt):
            raise ConfigError(f"t_end={cfg['t_end']} is not a whole multiple of dt={dt}")
        if "sample_interval" in cfg and not _whole(cfg["sample_interval"], dt):
            raise ConfigError(f"sample_interval={cfg['sample_interval']} is not a whole multiple of dt={dt}")
    if "sample_interval" in cfg and cfg["t_end"] > 0 and not _whole(cfg["t_end"], cfg["sample_interval"]):
        raise ConfigError("t_end must be a whole multiple of sample_interval")

    if exp in ("dispersion", "soundspeed", "linearize", "instability") and g["dim"] != 1:
        raise ConfigError(f"'{exp}' runs on one-dimensional grids")
    if exp in ("linearize", "instability") and cfg["mode"] != "torus":
        raise ConfigError(f"'{exp}' needs mode 'torus'")
    if exp == "linearize" and kind == "bump" and pot["sign"] < 0:
        raise ConfigError("'linearize' needs a non-negative potential (constant reference)")
    if exp == "soundspeed" and kind == "bump" and pot["sign"] < 0:
        raise ConfigError("no real sound speed for an attractive potential")
    if exp == "dispersion" and cfg.get("modes") is not None and cfg["modes"] > sizes[0][0] // 2:
        raise ConfigError(f"at most n/2 = {sizes[0][0] // 2} nonzero modes exist")
    if exp == "dispersion" and len(sizes) != 1:
        raise ConfigError("'dispersion' takes a single box size")
    if exp == "soundspeed":
        for n, L in sizes:
            if cfg["fit_modes"] > n // 2:
                raise ConfigError(f"fit_modes exceeds the n/2 = {n // 2} available modes at L={L}")
    if exp == "manybody-converge":
        if g["dim"] != 1:
            raise ConfigError("many-body lattice must be one-dimensional")
        if cfg["mode"] != "torus":
            raise ConfigError("many-body comparison needs mode 'torus'")
        for n, L in sizes:
            for rho in as_list(cfg["rho"]):
                N = rho * L
                if abs(N - round(N)) > 1e-9 * max(1.0, N) or round(N) < 1:
                    raise ConfigError(f"rho * L = {N} is not a positive integer particle number (rho={rho}, L={L})")


def resolve(doc: Mapping[str, Any], experiment: str, *, out: str | None = None, seed: int | None = None) -> dict:
    """Validate ``doc`` for ``experiment`` and fill in defaults and overrides."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    doc = copy.deepcopy(dict(doc))
    if doc.setdefault("experiment", experiment) != experiment:
        raise ConfigError(f"config is for experiment {doc['experiment']!r}, not {experiment!r}")
    try:
        jsonschema.validate(doc, schema(experiment))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None

    cfg = {**_COMMON_DEFAULTS, **_DEFAULTS[experiment], **doc}
    cfg["grid"] = {"dim": 1, **cfg["grid"]}
    cfg["potential"] = {"kind": "bump", "sign": 1, **cfg["potential"]}
    if "excitation" in cfg:
        cfg["excitation"] = {"shape": "smooth-bump", "noise": 0.0, **cfg["excitation"]}
    cfg.setdefault("output_dir", f"soundlab-out/{experiment}")
    if out is not None:
        cfg["output_dir"] = out
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"seed must be non-negative, got {seed}")
        cfg["seed"] = seed
    _semantic_checks(cfg)
    return cfg


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: Mapping[str, Any]) -> str:
    """sha256 of the resolved config without its output location."""
    body = {k: v for k, v in cfg.items() if k not in ("output_dir", "workers")}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()
