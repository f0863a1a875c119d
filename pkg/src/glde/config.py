"""JSON system definitions: schema, loading and canonical export."""

from __future__ import annotations

import json
import math

import jsonschema
import numpy as np

from .bv import BVMatrixFunction, JumpEvent, PiecewisePoly, RegulatedVectorFunction

__all__ = ["SCHEMA", "ConfigError", "validate", "parse", "load", "to_dict", "canonical_json", "dump"]


class ConfigError(ValueError):
    """Malformed or schema-invalid system definition."""


_NUM = {"type": "number"}
_ARR = {"type": "array"}

_DENSITY = {
    "type": "object",
    "required": ["breakpoints", "coefficients"],
    "additionalProperties": False,
    "properties": {
        "breakpoints": {"type": "array", "items": _NUM, "minItems": 2},
        "coefficients": {"type": "array", "minItems": 1},
    },
}

_JUMP = {
    "type": "object",
    "required": ["time", "pre", "post"],
    "additionalProperties": False,
    "properties": {"time": _NUM, "pre": _ARR, "post": _ARR},
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["dimension", "period", "A"],
    "additionalProperties": False,
    "properties": {
        "dimension": {"type": "integer", "minimum": 1},
        "period": {"type": "number", "exclusiveMinimum": 0},
        "A": {
            "type": "object",
            "required": ["density"],
            "additionalProperties": False,
            "properties": {
                "base": _ARR,
                "density": _DENSITY,
                "jumps": {"type": "array", "items": _JUMP},
            },
        },
        "f": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["density"],
                    "additionalProperties": False,
                    "properties": {
                        "base_value": _ARR,
                        "density": _DENSITY,
                        "jumps": {"type": "array", "items": _JUMP},
                    },
                },
            ]
        },
    },
}


def validate(data) -> None:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema error at {path}: {exc.message}") from None


def _array(x, shape, what):
    try:
        a = np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: not a numeric array") from None
    if shape is not None and a.shape != shape:
        raise ConfigError(f"{what}: expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{what}: non-finite entries")
    return a


def _density(d, period, vshape, what):
    bp = _array(d["breakpoints"], None, f"{what}.breakpoints")
    coef = _array(d["coefficients"], None, f"{what}.coefficients")
    if coef.ndim != 2 + len(vshape) or coef.shape[2:] != vshape or coef.shape[0] != bp.size - 1:
        raise ConfigError(
            f"{what}.coefficients: expected shape (cells, degree + 1, {', '.join(map(str, vshape))}), got {coef.shape}"
        )
    if abs(bp[0]) > 0 or abs(bp[-1] - period) > 1e-12 * period:
        raise ConfigError(f"{what}.breakpoints must run from 0 to the period {period}")
    bp[-1] = period
    try:
        return PiecewisePoly(bp, coef)
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _jumps(items, vshape, what):
    out = []
    for k, j in enumerate(items or ()):
        out.append(JumpEvent(
            float(j["time"]),
            _array(j["pre"], vshape, f"{what}[{k}].pre"),
            _array(j["post"], vshape, f"{what}[{k}].post"),
        ))
    return out


def parse(data):
    """Build ``(A, f)`` from a decoded config; ``f`` is ``None`` when absent."""
    validate(data)
    n = int(data["dimension"])
    w = float(data["period"])
    a = data["A"]
    try:
        A = BVMatrixFunction(
            _density(a["density"], w, (n, n), "A.density"),
            _jumps(a.get("jumps"), (n, n), "A.jumps"),
            base=_array(a["base"], (n, n), "A.base") if "base" in a else None,
        )
        f = None
        fd = data.get("f")
        if fd is not None:
            f = RegulatedVectorFunction(
                _density(fd["density"], w, (n,), "f.density"),
                _jumps(fd.get("jumps"), (n,), "f.jumps"),
                base=_array(fd["base_value"], (n,), "f.base_value") if "base_value" in fd else None,
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return A, f


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse(data)


def _bv_dict(F, base_key):
    return {
        base_key: F.base.tolist(),
        "density": {
            "breakpoints": F.density.breakpoints.tolist(),
            "coefficients": F.density.coefficients.tolist(),
        },
        "jumps": [{"time": j.time, "pre": j.pre.tolist(), "post": j.post.tolist()} for j in F.jumps],
    }


def to_dict(A, f=None) -> dict:
    return {
        "dimension": int(A.dimension),
        "period": float(A.period),
        "A": _bv_dict(A, "base"),
        "f": None if f is None else _bv_dict(f, "base_value"),
    }


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError("non-finite number in canonical JSON")
        s = format(x, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted(obj.items())
        return "{" + ",".join(json.dumps(str(k)) + ":" + _encode(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Sorted keys, no whitespace, floats with 17 significant digits."""
    return _encode(obj) + "\n"


def dump(A, f, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(to_dict(A, f)))
