"""Reading and writing model files.

A model file is a JSON object::

    {"b": 0.0, "gamma2": 1.0, "sigma": 1.0, "c": 1.0, "levy": {"family": "none"}}

``delta`` may replace ``b`` for subordinator-type mechanisms (``b`` is
then ``delta + int_(0,1) u mu(du)``).  An optional ``g`` object selects the
interaction of a branching diffusion; without it the diffusion commands
use ``g(z) = c z^2``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema

from .diffusion import DiffusionModel, Interaction, Logistic, interaction_from_dict
from .errors import DomainError
from .mechanisms import (
    BranchingMechanism,
    CompoundPoissonExp,
    GammaTail,
    LevyMeasure,
    ModelSpec,
    NoJumps,
    Stable,
    TabulatedTail,
)

__all__ = [
    "MODEL_SCHEMA",
    "ModelFileError",
    "validate_document",
    "levy_from_dict",
    "model_from_dict",
    "diffusion_from_dict",
    "model_to_dict",
    "diffusion_to_dict",
    "load_document",
    "load_model",
    "dump_model",
]

_num = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}
_numarray = {"type": "array", "items": _num, "minItems": 2}


def _family(name: str, props: dict) -> dict:
    required = ["family", *props]
    return {
        "type": "object",
        "properties": {"family": {"const": name}, **props},
        "required": required,
        "additionalProperties": False,
    }


def _kind(name: str, props: dict) -> dict:
    return {
        "type": "object",
        "properties": {"kind": {"const": name}, **props},
        "required": ["kind", *props],
        "additionalProperties": False,
    }


MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "branching model",
    "type": "object",
    "properties": {
        "b": _num,
        "delta": _num,
        "gamma2": _nonneg,
        "sigma": _nonneg,
        "c": _nonneg,
        "levy": {
            "oneOf": [
                _family("none", {}),
                _family("stable", {"alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2},
                                   "c_alpha": _pos}),
                _family("gamma", {"shape": _pos, "rate": _pos}),
                _family("cpexp", {"rate": _pos, "decay": _pos}),
                _family("tabulated", {"x": _numarray, "tail": _numarray, "exponent_zero": _nonneg,
                                      "exponent_inf": _nonneg}),
            ]
        },
        "g": {
            "oneOf": [
                _kind("logistic", {"c": _nonneg}),
                _kind("linear", {"w": _num}),
                _kind("piecewise_polynomial", {"breaks": {"type": "array", "items": _nonneg, "minItems": 1},
                                               "coeffs": {"type": "array", "minItems": 1,
                                                          "items": {"type": "array", "items": _num,
                                                                    "minItems": 1}}}),
                _kind("tabulated", {"x": _numarray, "values": _numarray, "tail_power": _num}),
            ]
        },
    },
    "required": ["gamma2", "sigma", "levy"],
    "additionalProperties": False,
    "oneOf": [{"required": ["b"]}, {"required": ["delta"]}],
    "anyOf": [{"required": ["c"]}, {"required": ["g"]}],
}

_VALIDATOR = jsonschema.Draft202012Validator(MODEL_SCHEMA)


class ModelFileError(DomainError):
    """A model document failed schema validation or a model precondition."""


def validate_document(doc: dict) -> dict:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.path) or "<root>"
        raise ModelFileError(f"invalid model document at {where}: {first.message}")
    return doc


def levy_from_dict(d: dict) -> LevyMeasure:
    fam = d["family"]
    if fam == "none":
        return NoJumps()
    if fam == "stable":
        return Stable(float(d["alpha"]), float(d["c_alpha"]))
    if fam == "gamma":
        return GammaTail(float(d["shape"]), float(d["rate"]))
    if fam == "cpexp":
        return CompoundPoissonExp(float(d["rate"]), float(d["decay"]))
    if fam == "tabulated":
        return TabulatedTail(tuple(d["x"]), tuple(d["tail"]), float(d["exponent_zero"]), float(d["exponent_inf"]))
    raise ModelFileError(f"unknown Levy family {fam!r}")


def _mechanism(d: dict) -> BranchingMechanism:
    levy = levy_from_dict(d["levy"])
    gamma2 = float(d["gamma2"])
    if "delta" in d:
        return BranchingMechanism.from_delta(float(d["delta"]), levy, gamma2)
    return BranchingMechanism(b=float(d["b"]), gamma2=gamma2, levy=levy)


def model_from_dict(d: dict) -> ModelSpec:
    """Validated :class:`ModelSpec` from a model document."""
    validate_document(d)
    if "c" not in d:
        raise ModelFileError("the general model needs the competition rate c")
    try:
        return ModelSpec(mechanism=_mechanism(d), sigma=float(d["sigma"]), c=float(d["c"]))
    except ValueError as exc:
        raise ModelFileError(str(exc)) from exc


def diffusion_from_dict(d: dict) -> DiffusionModel:
    """Branching diffusion from a model document (``g`` defaults to ``c z^2``)."""
    validate_document(d)
    if d["levy"]["family"] != "none":
        raise ModelFileError("a branching diffusion has no jumps (levy.family must be 'none')")
    g: Interaction = interaction_from_dict(d["g"]) if "g" in d else Logistic(float(d["c"]))
    b = float(d["b"]) if "b" in d else float(d["delta"])
    try:
        return DiffusionModel(b=b, gamma2=float(d["gamma2"]), sigma=float(d["sigma"]), g=g)
    except ValueError as exc:
        raise ModelFileError(str(exc)) from exc


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        raise ModelFileError("model parameters must be finite")
    return float(x)


def model_to_dict(model: ModelSpec) -> dict:
    """Document that :func:`model_from_dict` maps back to an equal model."""
    mech = model.mechanism
    return {
        "b": _clean(mech.b),
        "gamma2": _clean(mech.gamma2),
        "sigma": _clean(model.sigma),
        "c": _clean(model.c),
        "levy": mech.levy.to_dict(),
    }


def diffusion_to_dict(diff: DiffusionModel) -> dict:
    return {"b": _clean(diff.b), "gamma2": _clean(diff.gamma2), "sigma": _clean(diff.sigma),
            "levy": {"family": "none"}, "g": diff.g.to_dict()}


def load_document(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFileError("a model document must be a JSON object")
    return validate_document(doc)


def load_model(path) -> ModelSpec:
    return model_from_dict(load_document(path))


def dump_model(model, path=None) -> str:
    doc = diffusion_to_dict(model) if isinstance(model, DiffusionModel) else model_to_dict(model)
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
