"""JSON readers and writers for boxes, joints, ensembles and hashes.

Entry arrays always follow the normative index order. Exact entries are
written as strings (``"1/4"``, ``"1/2 + 1/4*sqrt2"``), float entries as numbers.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .box import BoxShape, BoxTable, tensor
from .errors import InputError
from .hashing import HashFunction
from .scalar import QSqrt2, parse_scalar

_SHAPE_KEYS = ("pairs", "outcomes_a", "outcomes_b", "settings_a", "settings_b")


def load_json(path) -> Any:
    try:
        with open(Path(path), encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}") from exc


def dumps(doc) -> str:
    """Deterministic JSON text: sorted keys, fixed separators, UTF-8 kept."""
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False)


def _entry(value):
    if isinstance(value, bool):
        raise InputError("boolean is not a probability")
    if isinstance(value, (int, float, str)):
        return parse_scalar(value)
    raise InputError(f"unsupported entry {value!r}")


def entry_text(x):
    if isinstance(x, QSqrt2):
        if x.v == 0:
            return str(x.u)
        return f"{x.u} + {x.v}*sqrt2" if x.u else f"{x.v}*sqrt2"
    if isinstance(x, Fraction):
        return str(x)
    return float(x)


def _shape(d) -> BoxShape:
    if not isinstance(d, dict):
        raise InputError("'shape' must be an object")
    unknown = set(d) - set(_SHAPE_KEYS)
    if unknown:
        raise InputError(f"unknown shape fields: {sorted(unknown)}")
    try:
        return BoxShape(**{k: int(v) for k, v in d.items()})
    except (TypeError, ValueError) as exc:
        raise InputError(f"malformed shape: {exc}") from exc


def _entries(raw, exact_required=False) -> np.ndarray:
    if not isinstance(raw, list):
        raise InputError("'entries' must be a list")
    vals = [_entry(v) for v in raw]
    if exact_required and any(isinstance(v, float) for v in vals):
        raise InputError("exact mode needs rational entries")
    if any(isinstance(v, float) for v in vals):
        return np.array([float(v) for v in vals], dtype=np.float64)
    arr = np.empty(len(vals), dtype=object)
    arr[:] = vals
    return arr


def box_from_dict(d, exact_required: bool = False) -> BoxTable:
    if not isinstance(d, dict):
        raise InputError("a box must be a JSON object")
    if "product" in d:
        parts = d["product"]
        if not isinstance(parts, list) or not parts:
            raise InputError("'product' must be a nonempty list of boxes")
        return tensor([box_from_dict(p, exact_required) for p in parts])
    if "entries" not in d:
        raise InputError("box needs 'entries' (or 'product')")
    return BoxTable(_shape(d.get("shape", {})), _entries(d["entries"], exact_required))


def box_to_dict(box: BoxTable) -> dict:
    return {"shape": box.shape.to_dict(), "entries": [entry_text(e) for e in box.entries]}


def load_box(path, exact_required: bool = False) -> BoxTable:
    return box_from_dict(load_json(path), exact_required)


def joint_from_dict(d):
    from .security import JointDistribution

    if not isinstance(d, dict):
        raise InputError("a joint must be a JSON object")
    for key in ("eve_outcomes", "eve_settings", "entries"):
        if key not in d:
            raise InputError(f"joint needs '{key}'")
    try:
        E, Z = int(d["eve_outcomes"]), int(d["eve_settings"])
    except (TypeError, ValueError) as exc:
        raise InputError(f"malformed Eve dimensions: {exc}") from exc
    return JointDistribution(_shape(d.get("shape", {})), E, Z, _entries(d["entries"]))


def joint_to_dict(joint) -> dict:
    return {
        "shape": joint.shape.to_dict(),
        "eve_outcomes": joint.eve_outcomes,
        "eve_settings": joint.eve_settings,
        "entries": [entry_text(e) for e in joint.entries],
    }


def ensemble_from_dict(d):
    from .adversary import AttackEnsemble

    if not isinstance(d, dict) or not isinstance(d.get("ensemble"), list):
        raise InputError("an ensemble file needs an 'ensemble' list")
    comps = []
    for i, item in enumerate(d["ensemble"]):
        if not isinstance(item, dict) or "weight" not in item or "box" not in item:
            raise InputError(f"ensemble item {i} needs 'weight' and 'box'")
        comps.append((_entry(item["weight"]), box_from_dict(item["box"])))
    return AttackEnsemble(tuple(comps))


def hash_from_dict(d) -> HashFunction:
    if not isinstance(d, dict):
        raise InputError("a hash must be a JSON object")
    return HashFunction.from_dict(d)


def load_schema(command: str) -> dict:
    """Published JSON schema for a CLI subcommand (``"attack optimize"`` → ``attack_optimize.json``)."""
    from importlib import resources

    name = command.replace(" ", "_") + ".json"
    try:
        text = resources.files("bellpa").joinpath("schemas", name).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise InputError(f"no schema for {command!r}") from exc
    return json.loads(text)
