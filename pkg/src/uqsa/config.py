"""JSON model configuration files."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import jsonschema

_POS = {"type": "number", "exclusiveMinimum": 0}
_REAL = {"type": "number"}
_UNIT = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}


def _params(props, required):
    return {"type": "object", "properties": props, "required": required,
            "additionalProperties": False}


_MODEL_PARAMS = {
    "ctmc": _params({"k1": _POS, "k2": _POS, "n_max": {"type": "integer", "minimum": 1}},
                    ["k1", "k2"]),
    "dtmc": {"oneOf": [
        _params({"a": _UNIT, "b": _UNIT}, ["a", "b"]),
        _params({"matrix": {"type": "array", "minItems": 1,
                            "items": {"type": "array", "minItems": 1,
                                      "items": {"type": "number", "minimum": 0}}}},
                ["matrix"]),
    ]},
    "sde": _params({"alpha": _POS, "beta": _REAL, "gamma": _POS, "euler": {"type": "boolean"}},
                   ["alpha", "beta", "gamma"]),
    "lognormal": _params({"u0": _POS, "mu": _REAL, "sigma": _POS, "threshold": _POS, "t": _POS},
                         ["u0", "mu", "sigma", "threshold", "t"]),
    "expfam": _params({"family": {"enum": ["gaussian", "poisson", "bernoulli"]},
                       "theta": {"type": "array", "minItems": 1, "items": _REAL}},
                      ["family", "theta"]),
}

SCHEMA = {
    "type": "object",
    "properties": {
        "model": {
            "type": "object",
            "properties": {"type": {"enum": sorted(_MODEL_PARAMS)}, "params": {"type": "object"}},
            "required": ["type", "params"],
            "additionalProperties": False,
        },
        "sim": {
            "type": "object",
            "properties": {
                "n_paths": {"type": "integer", "minimum": 1},
                "horizon": _POS,
                "dt": _POS,
                "burn_in": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "workers": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
    },
    "required": ["model"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"model": {"properties": {"type": {"const": k}}}}},
         "then": {"properties": {"model": {"properties": {"params": v}}}}}
        for k, v in _MODEL_PARAMS.items()
    ],
}

SIM_DEFAULTS = {"n_paths": 1000, "horizon": 50.0, "dt": 0.01, "burn_in": None, "seed": 0,
                "workers": 1}


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    params: dict
    sim: dict = field(default_factory=dict)


def parse_config(doc) -> ModelConfig:
    """Validate a decoded document; raises ``jsonschema.ValidationError``."""
    jsonschema.validate(doc, SCHEMA)
    sim = dict(SIM_DEFAULTS)
    sim.update(doc.get("sim", {}))
    return ModelConfig(doc["model"]["type"], dict(doc["model"]["params"]), sim)


def load_config(path) -> ModelConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return parse_config(doc)


def resolve_seed(cli_seed, cfg_seed) -> int:
    """Flag beats the ``UQSA_SEED`` environment variable, which beats the file."""
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("UQSA_SEED")
    if env is not None and env.strip():
        try:
            seed = int(env)
        except ValueError:
            raise ValueError(f"UQSA_SEED must be an integer, got {env!r}") from None
        if seed < 0:
            raise ValueError("UQSA_SEED must be nonnegative")
        return seed
    return int(cfg_seed)
