"""JSON schemas for CLI configs and emitted documents."""

from __future__ import annotations

import math

import jsonschema
import numpy as np

from .errors import ValidationError
from .families.spec import Kind

_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}
_vec = {"type": "array", "items": _num, "minItems": 1, "maxItems": 2}

FAMILY = {
    "type": "object",
    "properties": {
        "kind": {"enum": [k.value for k in Kind]},
        "bounds": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "base": {"type": "string"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

MODEL = {
    "oneOf": [
        {"type": "string"},
        {
            "type": "object",
            "properties": {
                "name": {"type": "string"},
                "weights": {"type": "array", "items": _num},
                "target": {"type": "string"},
            },
            "required": ["name"],
            "additionalProperties": False,
        },
    ]
}

STUDY_CONFIG = {
    "type": "object",
    "properties": {
        "inputs": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "family": FAMILY,
                    "baseline": _vec,
                },
                "required": ["name", "family", "baseline"],
                "additionalProperties": False,
            },
        },
        "model": MODEL,
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "sample_size": {"type": "integer", "minimum": 100},
        "delta_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "sphere_K": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "bootstrap_replicates": {"type": "integer", "minimum": 1},
        "ci_level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "sphere_steps": {"type": "integer", "minimum": 1},
        "sphere_method": {"enum": ["euler", "rk4"]},
        "sphere_mode": {"enum": ["shared", "per-radius"]},
        "threads": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
    },
    "required": ["inputs", "model"],
    "additionalProperties": False,
}

# geometry subcommands: flag names as keys
GEOMETRY_CONFIG = {
    "type": "object",
    "properties": {
        "family": FAMILY,
        "theta": _vec,
        "velocity": _vec,
        "delta": {"type": "number"},
        "k": {"type": "integer", "minimum": 1},
        "steps": {"type": "integer", "minimum": 1},
        "method": {"enum": ["euler", "rk4"]},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "grid": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
        "ode": {"type": "boolean"},
        "numeric": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "format": {"enum": ["csv", "json"]},
    },
    "additionalProperties": False,
}

FLOOD_CONFIG = {
    "type": "object",
    "properties": {
        "sample_size": {"type": "integer", "minimum": 100},
        "sphere_K": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "delta_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "bootstrap_replicates": {"type": "integer", "minimum": 1},
        "ci_level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "sphere_steps": {"type": "integer", "minimum": 1},
        "sphere_method": {"enum": ["euler", "rk4"]},
        "sphere_mode": {"enum": ["shared", "per-radius"]},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
    },
    "additionalProperties": False,
}

FIM_DOC = {
    "type": "object",
    "properties": {
        "family": FAMILY,
        "theta": _vec,
        "source": {"enum": ["closed-form", "quadrature", "monte-carlo"]},
        "fim": {"type": "array", "items": {"type": "array", "items": _num}},
    },
    "required": ["family", "theta", "source", "fim"],
}

CHRISTOFFEL_DOC = {
    "type": "object",
    "properties": {
        "family": FAMILY,
        "theta": _vec,
        "source": {"enum": ["closed-form", "finite-difference"]},
        "symbols": {"type": "array"},
    },
    "required": ["family", "theta", "source", "symbols"],
}

GEODESIC_DOC = {
    "type": "object",
    "properties": {
        "family": FAMILY,
        "status": {"enum": ["complete", "blew-up"]},
        "blowup_time": _num_or_null,
        "initial_speed": _num,
        "times": {"type": "array", "items": _num},
        "points": {"type": "array", "items": _vec},
        "velocities": {"type": "array", "items": _vec},
        "speeds": {"type": "array", "items": _num},
    },
    "required": ["family", "status", "times", "points", "velocities", "initial_speed"],
}

SPHERE_DOC = {
    "type": "object",
    "properties": {
        "family": FAMILY,
        "center": _vec,
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "source": {"enum": ["ode", "closed-form"]},
        "points": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "index": {"type": "integer"},
                    "angle": _num,
                    "coords": {"type": "array", "items": _num_or_null},
                    "status": {"enum": ["complete", "blew-up"]},
                },
                "required": ["index", "coords", "status"],
            },
        },
    },
    "required": ["family", "center", "radius", "points"],
}

_interval = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

RESULT_DOC = {
    "type": "object",
    "properties": {
        "config": {"type": "object"},
        "baseline_quantile": _num,
        "cells": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "input": {"type": "string"},
                    "delta": _num,
                    "s_min": _num,
                    "s_max": _num,
                    "argmin": _vec,
                    "argmax": _vec,
                    "ci_min": _interval,
                    "ci_max": _interval,
                    "blowups": {"type": "integer", "minimum": 0},
                },
                "required": ["input", "delta", "s_min", "s_max", "ci_min", "ci_max", "blowups"],
            },
        },
        "errors": {"type": "object"},
        "extras": {"type": "object"},
    },
    "required": ["config", "baseline_quantile", "cells", "errors"],
}


def jsonable(obj):
    """Plain-Python copy of ``obj`` with non-finite floats replaced by ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def validate(doc, schema, what="document"):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ValidationError(f"invalid {what} at '{path}': {exc.message}") from None
    return doc
