"""Declarative experiment configuration.

A config is one JSON document validated against ``CONFIG_SCHEMA``. Unknown
keys are rejected at every level, non-finite numbers are rejected by the
parser, and numbers must be plain JSON numbers (no expressions).
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from ..errors import ConfigurationError
from ..model import PROFILE_PRESETS, LineDiscretization, ModelSpec, build_inner_pair, model_from_dict

EXPERIMENTS = ("verify-main", "sweep-lambda", "sweep-epsilon", "converge", "sf-demo", "identities")

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_MATRIX = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": _NUMBER},
}


def _gen(kind: str, **props) -> dict:
    return {
        "type": "object",
        "properties": {"kind": {"const": kind}, **props},
        "required": ["kind", *[k for k, v in props.items() if v.get("_required")]],
        "additionalProperties": False,
    }


def _strip(schema):
    # the private _required marker is not a JSON-schema keyword
    if isinstance(schema, dict):
        return {k: _strip(v) for k, v in schema.items() if k != "_required"}
    if isinstance(schema, list):
        return [_strip(v) for v in schema]
    return schema


_RANDOM = dict(seed=_SEED, scale=_POSITIVE, complex={"type": "boolean"})

D2_SCHEMA = {
    "oneOf": [
        _gen("scalar", value=_NUMBER),
        _gen("diagonal-linear", k_max={"type": "integer", "minimum": 0, "_required": True}),
        _gen("harmonic"),
        _gen("matrix", entries={**_MATRIX, "_required": True}),
        _gen("random", **_RANDOM),
    ]
}

A_SCHEMA = {
    "oneOf": [
        _gen("scalar", value=_NUMBER),
        _gen("matrix", entries={**_MATRIX, "_required": True}),
        _gen("random", **_RANDOM),
        _gen("banded", diag=_NUMBER, off=_NUMBER),
        _gen("conjugation-shift", seed=_SEED),
    ]
}

PROFILE_SCHEMA = {
    "oneOf": [
        {"type": "string", "enum": sorted(PROFILE_PRESETS)},
        {
            "type": "object",
            "properties": {
                "preset": {"type": "string", "enum": sorted(PROFILE_PRESETS)},
                "shape": {"type": "string", "enum": ["tanh-clamped", "smoothed-step"]},
                "h_minus": _NUMBER,
                "h_plus": _NUMBER,
                "K": _POSITIVE,
                "epsilon": _POSITIVE,
            },
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = _strip(
    {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": {
            "experiment": {"type": "string", "enum": list(EXPERIMENTS)},
            "model": {
                "type": "object",
                "properties": {
                    "inner_dim": {"type": "integer", "minimum": 1},
                    "d2": D2_SCHEMA,
                    "a": A_SCHEMA,
                    "profile": PROFILE_SCHEMA,
                    "epsilon": _POSITIVE,
                },
                "required": ["inner_dim", "d2", "a"],
                "additionalProperties": False,
            },
            "disc": {
                "type": "object",
                "properties": {
                    "T": _POSITIVE,
                    "n": {"type": "integer", "minimum": 3},
                    "bc": {"const": "dirichlet"},
                    "safety_factor": _POSITIVE,
                },
                "required": ["T", "n"],
                "additionalProperties": False,
            },
            "m": {"type": "integer", "minimum": 1},
            "lambda_values": {"type": "array", "minItems": 1, "items": _POSITIVE},
            "epsilon_values": {"type": "array", "minItems": 1, "items": _POSITIVE},
            "seed": _SEED,
            "output_dir": {"type": "string", "minLength": 1},
            "refine": {"type": "boolean"},
            "tolerance": _POSITIVE,
            "record_wall_time": {"type": "boolean"},
            "ladder": {
                "type": "object",
                "properties": {
                    "n": {"type": "array", "minItems": 2, "items": {"type": "integer", "minimum": 3}},
                    "T": {"type": "array", "minItems": 2, "items": _POSITIVE},
                },
                "additionalProperties": False,
            },
        },
        "required": ["experiment", "model", "disc", "m", "lambda_values"],
        "additionalProperties": False,
    }
)

_SEEDED_KINDS = ("random", "conjugation-shift")


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description; ``raw`` is the normalized JSON."""

    model: ModelSpec
    disc: LineDiscretization
    m: int
    lambda_values: tuple[float, ...]
    epsilon_values: tuple[float, ...]
    experiment: str
    seed: int
    output_dir: str
    refine: bool = True
    tolerance: float = 1e-3
    record_wall_time: bool = False
    ladder: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _reject_constant(name):
    raise ConfigurationError(f"non-finite number {name} is not allowed in a config")


def parse_json(text: str, source: str = "<config>") -> Any:
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _field_path(error: jsonschema.ValidationError) -> str:
    path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in error.absolute_path)
    return "$" + path


def validate(raw: Any, source: str = "<config>") -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        # oneOf failures bury the useful message; report the deepest one
        def deepest(err):
            if err.context:
                return max((deepest(c) for c in err.context), key=lambda e: len(e.absolute_path))
            return err

        lines = []
        for err in errors:
            leaf = deepest(err)
            lines.append(f"{source}: field {_field_path(leaf)}: {leaf.message}")
        raise ConfigurationError("\n".join(lines))


def normalize(raw: dict) -> dict:
    """Fill defaults explicitly so the digest covers every effective value."""
    out = copy.deepcopy(raw)
    seed = int(out.get("seed", 0))
    out["seed"] = seed
    model = out["model"]
    for key in ("d2", "a"):
        if model[key]["kind"] in _SEEDED_KINDS:
            model[key].setdefault("seed", seed)
    model.setdefault("profile", "tanh-clamped")
    model.setdefault("epsilon", 1.0)
    disc = out["disc"]
    disc.setdefault("bc", "dirichlet")
    disc.setdefault("safety_factor", 4.0)
    out.setdefault("epsilon_values", [1.0])
    out.setdefault("output_dir", "results")
    out.setdefault("refine", True)
    out.setdefault("tolerance", 1e-3)
    out.setdefault("record_wall_time", False)
    out.setdefault("ladder", {})
    return out


def config_from_dict(raw: Any, source: str = "<config>") -> ExperimentConfig:
    validate(raw, source)
    raw = normalize(raw)
    try:
        model = model_from_dict(raw["model"])
        disc = LineDiscretization(**raw["disc"])
        build_inner_pair(model)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    return ExperimentConfig(
        model=model,
        disc=disc,
        m=int(raw["m"]),
        lambda_values=tuple(float(x) for x in raw["lambda_values"]),
        epsilon_values=tuple(float(x) for x in raw["epsilon_values"]),
        experiment=raw["experiment"],
        seed=raw["seed"],
        output_dir=raw["output_dir"],
        refine=raw["refine"],
        tolerance=float(raw["tolerance"]),
        record_wall_time=raw["record_wall_time"],
        ladder=raw["ladder"],
        raw=raw,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(parse_json(text, str(path)), str(path))
