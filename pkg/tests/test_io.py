import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from bellpa.adversary import AttackEnsemble
from bellpa.box import pr_box, tensor, uniform_box
from bellpa.errors import InputError
from bellpa.hashing import hash_from_seed
from bellpa.io import (
    box_from_dict,
    box_to_dict,
    dumps,
    ensemble_from_dict,
    hash_from_dict,
    joint_from_dict,
    joint_to_dict,
    load_box,
    load_json,
    load_schema,
)
from bellpa.scalar import QSqrt2
from bellpa.security import JointDistribution

from conftest import VERTICES, vertex_mixtures


@given(vertex_mixtures(pairs=2))
def test_box_round_trip(box):
    back = box_from_dict(json.loads(dumps(box_to_dict(box))))
    assert back.shape == box.shape and list(back.entries) == list(box.entries)


def test_float_box_round_trip():
    box = pr_box().to_float()
    back = box_from_dict(box_to_dict(box))
    assert not back.exact and np.array_equal(back.entries, box.entries)


def test_irrational_entries_parse():
    d = box_to_dict(pr_box())
    d["entries"] = ["1/2 - 1/4*sqrt2" if e == "1/2" else "1/4*sqrt2" if e == "0" else e for e in d["entries"]]
    box = box_from_dict(d)
    assert box.entries[0] == QSqrt2(Fraction(1, 2), Fraction(-1, 4))


def test_product_form():
    d = {"product": [box_to_dict(pr_box()), box_to_dict(uniform_box())]}
    assert list(box_from_dict(d).entries) == list(tensor([pr_box(), uniform_box()]).entries)


@pytest.mark.parametrize("doc", [
    [],
    {"shape": {}},
    {"entries": "x"},
    {"entries": [True] * 16},
    {"entries": [0.25] * 16, "shape": {"colour": 2}},
    {"entries": [0.25] * 16, "shape": {"pairs": "two"}},
    {"entries": ["1/0"] * 16},
    {"product": []},
])
def test_malformed_boxes(doc):
    with pytest.raises(InputError):
        box_from_dict(doc)


def test_exact_required_rejects_floats():
    with pytest.raises(InputError):
        box_from_dict({"entries": [0.25] * 16}, exact_required=True)


def test_joint_round_trip():
    joint = JointDistribution(pr_box().shape, 2, 1, [e * Fraction(1, 2) for e in pr_box().entries for _ in (0, 1)])
    back = joint_from_dict(joint_to_dict(joint))
    assert back.eve_outcomes == 2 and list(back.entries) == list(joint.entries)
    with pytest.raises(InputError):
        joint_from_dict({"eve_outcomes": 1, "entries": []})
    with pytest.raises(InputError):
        joint_from_dict({"eve_outcomes": "x", "eve_settings": 1, "entries": []})


def test_ensemble_round_trip():
    att = AttackEnsemble(((Fraction(1, 3), VERTICES[0]), (Fraction(2, 3), VERTICES[16])))
    back = ensemble_from_dict(json.loads(dumps(att.to_dict())))
    assert back.weights == att.weights
    with pytest.raises(InputError):
        ensemble_from_dict({"ensemble": [{"weight": 1}]})
    with pytest.raises(InputError):
        ensemble_from_dict({})


def test_hash_round_trip():
    h = hash_from_seed(3, 1, 1, 9)
    assert hash_from_dict(json.loads(dumps(h.to_dict()))).to_dict() == h.to_dict()
    with pytest.raises(InputError):
        hash_from_dict({"nr": 2})
    with pytest.raises(InputError):
        hash_from_dict([1])


def test_file_errors(tmp_path):
    with pytest.raises(InputError):
        load_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(InputError):
        load_box(bad)


def test_dumps_is_deterministic():
    assert dumps({"b": 1, "a": "√2"}) == '{\n  "a": "√2",\n  "b": 1\n}'


def test_schemas_ship():
    for name in ("validate", "bell eval", "attack optimize", "error"):
        assert "draft/2020-12" in load_schema(name)["$schema"]
    with pytest.raises(InputError):
        load_schema("nothing")
