"""Benchmark configuration: a YAML document validated against ``SCHEMA``.

Example::

    seed: 0
    out: runs/toy
    dataset:
      toy: {seed: 1, count: 20, length: 12, frame_size: 32}
    tracker:
      weights: toy_tracker.bin
    attacks: [none, trackpgd]
    attack: {epsilon: 0.0313725, alpha: 0.0078431, iters: 10}
    eval: {contour_tol: 1, reinit_gap: 5, n_jobs: 1}
    sweep: {lambda1: [10000, 1000, 100, 10, 1, 0.1], lambda2: [4, 2, 1, 0.5, 0.25, 0.125]}
"""

import copy
from pathlib import Path

import jsonschema
import yaml

from ..attack import ATTACK_KINDS
from ..exceptions import ConfigError

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}

_toy_data = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"seed": {"type": "integer"}, "count": _pos_int, "length": _pos_int,
                   "frame_size": {"type": "integer", "minimum": 4}},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dataset", "tracker"],
    "properties": {
        "seed": {"type": "integer"},
        "out": {"type": "string"},
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string"}, "toy": _toy_data, "limit": _pos_int},
            "oneOf": [{"required": ["path"]}, {"required": ["toy"]}],
        },
        "tracker": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string"},
                "weights": {"type": "string"},
                "train": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"data": _toy_data, "epochs": {"type": "integer", "minimum": 0},
                                   "channels": _pos_int, "lr": _num, "seed": {"type": "integer"}},
                },
            },
            "oneOf": [{"required": ["weights"]}, {"required": ["train"]}],
        },
        "attacks": {"type": "array", "minItems": 1, "uniqueItems": True,
                    "items": {"enum": list(ATTACK_KINDS)}},
        "attack": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "number", "minimum": 0, "maximum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "iters": {"type": "integer", "minimum": 0},
                "step_sign": {"enum": ["ascend", "descend"]},
                "lambda1": {"type": "number", "minimum": 0},
                "lambda2": {"type": "number", "minimum": 0},
                "gamma": {"type": "number", "minimum": 0},
                "alpha_t": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "dice_smooth": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"contour_tol": {"type": "integer", "minimum": 0},
                           "reinit_gap": {"type": "integer", "minimum": 0},
                           "n_jobs": {"type": "integer"}},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["table", "grid", "ablation"]},
                "lambda1": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                "lambda2": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                "seeds": {"type": "array", "minItems": 1, "items": {"type": "integer"}},
            },
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "out": "runs/default",
    "attacks": ["none", "trackpgd"],
    "attack": {},
    "eval": {"contour_tol": 1, "reinit_gap": 5, "n_jobs": 1},
    "sweep": {"mode": "table", "lambda1": [10000, 1000, 100, 10, 1, 0.1],
              "lambda2": [4, 2, 1, 0.5, 0.25, 0.125]},
}


def validate_config(cfg):
    """Validate ``cfg`` and return a copy with defaults filled in."""
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a mapping")
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    out = copy.deepcopy(DEFAULTS)
    for key, value in cfg.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = {**out[key], **copy.deepcopy(value)}
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return validate_config(cfg or {})
