"""JSON run configuration: schema, default expansion, and object construction.

A resolved configuration has every default filled in and is echoed into each
report, so a run can be reproduced from its report alone.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import jsonschema

from .bench import Dataset, TrainerConfig, gen_mackey_glass, gen_narma10, read_csv, split_indices
from .errors import InvalidConfigurationError
from .fixedpoint import DatapathFormats
from .nonlinearity import NonlinearitySpec, Variant, build_pwl
from .reservoir import MaskKind, MaskVector, ReservoirParams, new_mask

SCHEMA_VERSION = 1

_QFORMAT = {
    "type": "object",
    "properties": {
        "total_bits": {"type": "integer", "minimum": 2, "maximum": 64},
        "frac_bits": {"type": "integer", "minimum": 0, "maximum": 63},
        "rounding": {"enum": ["truncate", "rne"]},
        "overflow": {"enum": ["saturate", "wrap"]},
    },
    "required": ["total_bits", "frac_bits"],
    "additionalProperties": False,
}

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "edgedfr run configuration",
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "reservoir": {
            "type": "object",
            "properties": {
                "n_virtual": {"type": "integer", "minimum": 1},
                "feedback_gain": {"type": "number"},
                "input_gain": {"type": "number"},
                "update_mode": {"enum": ["ideal-delay", "cascade"]},
                "cascade_coupling": {"type": "number", "minimum": 0, "maximum": 1},
                "nonlinearity": {
                    "type": "object",
                    "properties": {
                        "variant": {"enum": [v.value for v in Variant]},
                        "mg_exponent": {"type": "number", "exclusiveMinimum": 0},
                        "base": {"enum": ["tanh", "mackey-glass", "identity"]},
                        "segments": {"type": "integer", "minimum": 1},
                        "lo": {"type": "number"},
                        "hi": {"type": "number"},
                        "pwl": {
                            "type": "object",
                            "properties": {"breakpoints": _NUMBER_LIST, "values": _NUMBER_LIST},
                            "required": ["breakpoints", "values"],
                        },
                    },
                    "required": ["variant"],
                    "additionalProperties": False,
                },
                "mask": {
                    "type": "object",
                    "properties": {
                        "kind": {"enum": [k.value for k in MaskKind]},
                        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "trainer": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["rls", "lms"]},
                "forgetting": {"type": "number"},
                "init_scale": {"type": "number"},
                "step_size": {"type": ["number", "null"]},
            },
            "additionalProperties": False,
        },
        "mode": {"enum": ["float", "quantized"]},
        "formats": {
            "type": "object",
            "properties": {"state": _QFORMAT, "weight": _QFORMAT, "accum": _QFORMAT},
            "additionalProperties": False,
        },
        "task": {
            "type": "object",
            "properties": {
                "name": {"type": "string", "pattern": "^(narma10|mackey-glass|csv:.+)$"},
                "length": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "washout_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "train_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "horizon": {"type": "integer", "minimum": 1},
                # derived by resolve(); accepted so resolved configs can be re-run
                "washout": {"type": "integer"},
                "train_end": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "continual": {"type": "boolean"},
        "output": {
            "type": "object",
            "properties": {
                "report": {"type": ["string", "null"]},
                "weights": {"type": ["string", "null"]},
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "properties": {
                "n_virtual": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "feedback_gain": _NUMBER_LIST,
                "input_gain": _NUMBER_LIST,
                "frac_bits": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "reservoir": {
        "n_virtual": 100,
        "feedback_gain": 0.8,
        "input_gain": 0.5,
        "update_mode": "cascade",
        "cascade_coupling": 0.5,
        "nonlinearity": {"variant": "tanh"},
        "mask": {"kind": "binary", "seed": 0},
    },
    "trainer": {"kind": "rls", "forgetting": 1.0, "init_scale": 1e-4, "step_size": None},
    "mode": "float",
    "formats": DatapathFormats().to_dict(),
    "task": {"name": "narma10", "length": 4000, "seed": 1, "washout_fraction": 0.05,
             "train_fraction": 0.75, "horizon": 1},
    "continual": False,
    "output": {"report": None, "weights": None},
}

PWL_DEFAULTS = {"base": "tanh", "segments": 64, "lo": -4.0, "hi": 4.0}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(raw: dict) -> None:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidConfigurationError(f"config error at {path}: {exc.message}") from None


def resolve(raw: dict) -> dict:
    """Validate ``raw`` and return it with every default expanded."""
    validate(raw)
    cfg = _merge(DEFAULTS, raw)
    nl = cfg["reservoir"]["nonlinearity"]
    if nl["variant"] == "mackey-glass":
        nl.setdefault("mg_exponent", 1.0)
    if nl["variant"] == "pwl" and "pwl" not in nl:
        for key, value in PWL_DEFAULTS.items():
            nl.setdefault(key, value)
    if cfg["mode"] == "quantized" and nl["variant"] not in ("pwl", "identity"):
        raise InvalidConfigurationError(
            "quantized mode requires a piecewise-linear (or identity) nonlinearity")
    task = cfg["task"]
    if task["name"].startswith("csv:"):
        task["length"] = len(read_csv(task["name"][len("csv:"):]))
    washout, train_end = split_indices(task["length"], task["washout_fraction"], task["train_fraction"])
    task["washout"], task["train_end"] = washout, train_end
    if "sweep" in cfg and "frac_bits" in cfg["sweep"] and cfg["mode"] != "quantized":
        raise InvalidConfigurationError("a frac_bits sweep needs mode=quantized")
    # surface parameter errors now rather than mid-run
    build_run(cfg)
    return cfg


def load(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise InvalidConfigurationError(f"{path}: top-level JSON value must be an object")
    return resolve(raw)


def build_nonlinearity(d: dict) -> NonlinearitySpec:
    variant = Variant(d["variant"])
    if variant is not Variant.PIECEWISE_LINEAR:
        return NonlinearitySpec.from_dict(d)
    if "pwl" in d:
        return NonlinearitySpec.from_dict(d)
    base = NonlinearitySpec(Variant(d["base"]), float(d.get("mg_exponent", 1.0)))
    return NonlinearitySpec.piecewise_linear(build_pwl(base, d["segments"], d["lo"], d["hi"]))


@dataclass
class Run:
    """Objects built from a resolved configuration."""

    params: ReservoirParams
    mask: MaskVector
    trainer: TrainerConfig
    mode: str
    formats: DatapathFormats
    continual: bool


def build_run(cfg: dict) -> Run:
    r = cfg["reservoir"]
    try:
        params = ReservoirParams(
            n_virtual=r["n_virtual"], feedback_gain=r["feedback_gain"], input_gain=r["input_gain"],
            nonlinearity=build_nonlinearity(r["nonlinearity"]), update_mode=r["update_mode"],
            cascade_coupling=r["cascade_coupling"], washout=cfg["task"]["washout"])
        mask = new_mask(params.n_virtual, MaskKind(r["mask"]["kind"]), r["mask"]["seed"])
        t = cfg["trainer"]
        trainer = TrainerConfig(t["kind"], t["forgetting"], t["init_scale"], t["step_size"])
        if trainer.kind == "rls":
            # construct once so invalid forgetting/init_scale surface as config errors
            trainer.make_float(1)
        formats = DatapathFormats.from_dict(cfg["formats"])
    except ValueError as exc:
        raise InvalidConfigurationError(str(exc)) from None
    return Run(params, mask, trainer, cfg["mode"], formats, cfg["continual"])


def build_dataset(cfg: dict) -> Dataset:
    task = cfg["task"]
    name = task["name"]
    wf, tf = task["washout_fraction"], task["train_fraction"]
    if name == "narma10":
        return gen_narma10(task["length"], task["seed"], wf, tf)
    if name == "mackey-glass":
        return gen_mackey_glass(task["length"], horizon=task["horizon"],
                                washout_fraction=wf, train_fraction=tf)
    return read_csv(name[len("csv:"):], wf, tf)
