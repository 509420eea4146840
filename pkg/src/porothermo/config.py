"""Run configuration: JSON schema, defaults and scenario-level validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .kernel import MemoryKernel, kernel_from_dict
from .material import MaterialParams

LOAD_TYPES = ("boundary_heat_pulse", "boundary_traction_pulse", "initial_displacement_bump", "porosity_kick")
BOUNDARY_LOADS = ("boundary_heat_pulse", "boundary_traction_pulse")
PROFILES = ("smooth", "poly")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


_number = {"type": "number"}
_coef = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 1}]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "material": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _coef for k in ("rho", "chi", "c", "theta0", "C", "A", "xi",
                                               "D", "B", "b", "Mc", "a", "m")},
        },
        "kernel": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["prony", "tabulated"]},
                "terms": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["k", "tau"],
                        "properties": {"k": _number, "tau": _number},
                    },
                },
                "ds": _number,
                "values": {"type": "array", "items": _number},
            },
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"L": _number, "N": {"type": "integer"}},
        },
        "T": _number,
        "cfl": _number,
        "sigma": {"type": "array", "items": _number, "minItems": 1},
        "load": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "type": {"enum": list(LOAD_TYPES)},
                "amplitude": _number,
                "x0": _number,
                "onset": _number,
                "t1": _number,
                "profile": {"enum": list(PROFILES)},
            },
        },
        "body": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"f": _number, "ell": _number, "r": _number},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_snapshots": {"type": "integer", "minimum": 1},
                "flux_check_every": {"type": "integer", "minimum": 1},
            },
        },
    },
}

DEFAULTS = {
    "material": MaterialParams().to_dict(),
    "kernel": {"type": "prony", "terms": [{"k": 1.0, "tau": 0.5}]},
    "grid": {"L": 8.0, "N": 400},
    "T": 4.0,
    "cfl": 0.4,
    "sigma": [0.5, 1.0, 2.0],
    "load": {"type": "boundary_heat_pulse", "amplitude": 1.0, "x0": 0.0, "onset": 0.25, "t1": 1.0,
             "profile": "poly"},
    "body": {"f": 0.0, "ell": 0.0, "r": 0.0},
    "output": {"n_snapshots": 9, "flux_check_every": 25},
}


@dataclass(frozen=True)
class LoadSpec:
    type: str
    amplitude: float
    x0: float
    t1: float
    profile: str = "smooth"
    onset: float = 0.0

    @property
    def is_boundary(self) -> bool:
        return self.type in BOUNDARY_LOADS

    @property
    def t_end(self) -> float:
        """Time after which the pulse is identically zero."""
        return self.onset + self.t1


@dataclass(frozen=True)
class BodySupply:
    f: float = 0.0
    ell: float = 0.0
    r: float = 0.0


@dataclass(frozen=True)
class Scenario:
    material: MaterialParams
    kernel: MemoryKernel
    L: float
    N: int
    T: float
    cfl: float
    sigma: tuple[float, ...]
    load: LoadSpec
    body: BodySupply = field(default_factory=BodySupply)
    n_snapshots: int = 9
    flux_check_every: int = 25
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dx(self) -> float:
        return self.L / self.N


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("kernel",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(cfg: dict | None = None) -> dict:
    """Validate against the schema and fill explicit defaults."""
    cfg = cfg or {}
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    return _merge(DEFAULTS, cfg)


def load_config(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def scenario_from_config(cfg: dict | None = None) -> Scenario:
    full = resolve_config(cfg)
    try:
        material = MaterialParams.from_dict(full["material"])
        kernel = kernel_from_dict(full["kernel"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ld = full["load"]
    load = LoadSpec(ld["type"], float(ld["amplitude"]), float(ld["x0"]), float(ld["t1"]), ld["profile"],
                    float(ld["onset"]))
    sc = Scenario(
        material=material,
        kernel=kernel,
        L=float(full["grid"]["L"]),
        N=int(full["grid"]["N"]),
        T=float(full["T"]),
        cfl=float(full["cfl"]),
        sigma=tuple(float(s) for s in full["sigma"]),
        load=load,
        body=BodySupply(**{k: float(v) for k, v in full["body"].items()}),
        n_snapshots=int(full["output"]["n_snapshots"]),
        flux_check_every=int(full["output"]["flux_check_every"]),
        raw=full,
    )
    _check_scenario(sc)
    return sc


def _check_scenario(sc: Scenario) -> None:
    if not 0 < sc.cfl <= 0.9:
        raise ConfigError(f"cfl must lie in (0, 0.9], got {sc.cfl}")
    if sc.N < 16:
        raise ConfigError(f"grid N must be at least 16, got {sc.N}")
    if sc.L <= 0:
        raise ConfigError("grid L must be positive")
    if sc.T < 0:
        raise ConfigError("T must be nonnegative")
    if any(s <= 0 for s in sc.sigma):
        raise ConfigError("sigma values must be positive")
    ld = sc.load
    if not 0 <= ld.x0 < sc.L / 4:
        raise ConfigError(f"load x0 must lie in [0, L/4), got {ld.x0}")
    body = any((sc.body.f, sc.body.ell, sc.body.r))
    if (ld.is_boundary and ld.amplitude != 0) or body:
        # the time profile is only used by pulses and body supplies
        if not ld.t1 > 0 or ld.onset < 0 or ld.t_end > sc.T:
            raise ConfigError(f"load pulse [onset, onset + t1] = [{ld.onset}, {ld.t_end}] must lie in [0, T]")
    if not ld.is_boundary and ld.amplitude != 0 and ld.x0 <= 0:
        raise ConfigError("initial bumps need x0 > 0")
    if body and ld.x0 <= 0:
        raise ConfigError("body supplies need x0 > 0")
