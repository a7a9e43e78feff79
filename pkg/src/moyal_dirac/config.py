"""Experiment configuration: JSON schema, defaults and lossless round-trip."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import jsonschema

EXPERIMENTS = ("moyal-check", "dirac-check", "scatter-ht", "scatter-nct", "fock-check", "conventions")
SWEEP_PARAMS = ("lambda", "tau", "theta", "resolution")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_profile = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "center": {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 1, "maxItems": 4}]},
        "width": _pos,
        "half_width": _pos,
        "amplitude": _num,
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "dimension": {"type": "integer", "minimum": 2, "maximum": 4},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "points": {"type": "array", "items": {"type": "integer", "minimum": 4, "maximum": 1024},
                           "minItems": 1, "maxItems": 4},
                "lengths": {"type": "array", "items": _pos, "minItems": 1, "maxItems": 4},
                "time_samples": {"type": "integer", "minimum": 16, "maximum": 8192},
                "tau": _pos,
            },
        },
        "theta": {"type": "number", "minimum": 0, "maximum": 100},
        "mass": {"type": "number", "not": {"const": 0}},
        "potential": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["pointwise", "star_sym", "star_sandwich", "nct_sandwich", "all"]},
                "lambdas": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 100},
                            "minItems": 1},
                "a": _profile,
                "b": _profile,
                "c": _profile,
                "steps": {"type": "integer", "minimum": 1, "maximum": 100000},
                "order": {"enum": [2, 4]},
            },
        },
        "taus": {"type": "array", "items": _pos, "minItems": 1},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "output": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
        "record_timing": {"type": "boolean"},
        "modes": {"type": "integer", "minimum": 1, "maximum": 10},
        "j_max": {"type": "integer", "minimum": 0, "maximum": 64},
        "cross_check": {"type": "boolean"},
    },
}


class ConfigError(ValueError):
    """Schema or range violation (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    experiment: str
    dimension: int | None = None
    grid: dict = field(default_factory=dict)
    theta: float | None = None
    mass: float = 1.0
    potential: dict = field(default_factory=dict)
    taus: list | None = None
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    seed: int = 0
    record_timing: bool = True
    modes: int | None = None
    j_max: int | None = None
    cross_check: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{where}: {exc.message}") from None
        cfg = cls(**copy.deepcopy(data))
        cfg._check_ranges()
        return cfg

    def to_dict(self) -> dict:
        """Only explicitly set fields, so ``from_dict(to_dict(c)) == c``."""
        out = {}
        defaults = {f.name: (f.default_factory() if callable(f.default_factory) else f.default)
                    for f in fields(self)}
        for k, v in asdict(self).items():
            if k == "experiment" or v != defaults[k]:
                out[k] = v
        return out

    def _check_ranges(self):
        g = self.grid
        if "points" in g and "lengths" in g and len(g["points"]) != len(g["lengths"]):
            raise ConfigError("grid: points and lengths must have the same length")
        for n in g.get("points", []):
            if n & (n - 1):
                raise ConfigError(f"grid: point count {n} is not a power of two")
        if "time_samples" in g and g["time_samples"] & (g["time_samples"] - 1):
            raise ConfigError("grid: time_samples must be a power of two")
        if self.dimension is not None and "points" in g:
            want = self.dimension if self.experiment == "moyal-check" else self.dimension - 1
            if len(g["points"]) != want:
                raise ConfigError(f"grid: need {want} axes for dimension {self.dimension}")

    def with_value(self, param: str, value: float) -> "ExperimentConfig":
        """Copy with one sweep parameter replaced."""
        d = copy.deepcopy(self.to_dict())
        if param == "lambda":
            d.setdefault("potential", {})["lambdas"] = [float(value)]
        elif param == "tau":
            d["taus"] = [float(value)]
            d.setdefault("grid", {})["tau"] = float(value)
        elif param == "theta":
            d["theta"] = float(value)
        elif param == "resolution":
            d.setdefault("grid", {})["time_samples"] = int(value)
        else:
            raise ConfigError(f"unknown sweep parameter {param!r}; choose from {SWEEP_PARAMS}")
        return ExperimentConfig.from_dict(d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(data)
