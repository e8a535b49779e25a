"""JSON system descriptions.

A file is an object with a ``form`` (``jump``, ``feedback``, ``estimation`` or
``estimator``) and the matrices of that form as nested row-major arrays.
Empty dimensions are written as ``[]`` together with a ``shape`` entry in
``"shapes"``.  Parametric example families are referenced instead by
``{"family": "exa1", "params": {"beta": 1.0}}``.
"""

import json
import os
from importlib import resources
from dataclasses import fields

import numpy as np

from . import systems
from .errors import ImpiqcError, SystemFileError
from .model import Estimator, EstimationPlant, FeedbackForm, JumpEstimationPlant, JumpForm

FORMS = {
    "jump": JumpForm,
    "feedback": FeedbackForm,
    "estimation": EstimationPlant,
    "estimator": Estimator,
}
FAMILIES = {
    "exa1": systems.exa1,
    "exa_syn": systems.exa_syn,
    "hold_loop": systems.hold_loop,
}


def _form_of(obj):
    if isinstance(obj, JumpEstimationPlant):
        return "estimation"
    for name, cls in FORMS.items():
        if isinstance(obj, cls):
            return name
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_dict(obj, labels=None):
    out = {"form": _form_of(obj)}
    shapes = {}
    for f in fields(obj):
        m = np.asarray(getattr(obj, f.name))
        out[f.name] = m.tolist()
        if m.size == 0:
            shapes[f.name] = list(m.shape)
    if shapes:
        out["shapes"] = shapes
    if labels:
        out["labels"] = dict(labels)
    return out


def from_dict(doc, **params):
    """Build a system from a parsed document; ``params`` override family parameters."""
    if not isinstance(doc, dict):
        raise SystemFileError("system description must be a JSON object")
    if "family" in doc:
        fam = doc["family"]
        if fam not in FAMILIES:
            raise SystemFileError(f"unknown family {fam!r}")
        kw = dict(doc.get("params", {}))
        kw.update({k: v for k, v in params.items() if v is not None})
        try:
            return FAMILIES[fam](**kw)
        except TypeError as exc:
            raise SystemFileError(f"bad parameters for {fam}: {exc}") from None
    form = doc.get("form")
    if form not in FORMS:
        raise SystemFileError(f"unknown or missing form {form!r}")
    cls = FORMS[form]
    if form == "estimation" and "A_J" in doc:
        cls = JumpEstimationPlant
    shapes = doc.get("shapes", {})
    kw = {}
    for f in fields(cls):
        if f.name not in doc:
            raise SystemFileError(f"{form} system is missing matrix {f.name!r}")
        try:
            m = np.array(doc[f.name], dtype=float)
        except (TypeError, ValueError):
            raise SystemFileError(f"matrix {f.name!r} is not numeric or ragged") from None
        if f.name in shapes:
            m = m.reshape(shapes[f.name])
        kw[f.name] = m
    try:
        return cls(**kw)
    except ImpiqcError as exc:
        raise SystemFileError(f"inconsistent dimensions: {exc}") from None


def bundled(name):
    """Path of a system file shipped with the package (``exa1.json`` etc.)."""
    return str(resources.files("impiqc") / "data" / os.path.basename(name))


def load(path, **params):
    """Load a system file; bare names of bundled files resolve to the package copy."""
    if not os.path.exists(path) and os.path.exists(bundled(path)):
        path = bundled(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"{path}: invalid JSON ({exc})") from None
    return from_dict(doc, **params)


def dump(obj, path, labels=None):
    with open(path, "w") as fh:
        json.dump(to_dict(obj, labels), fh, indent=1)
        fh.write("\n")
