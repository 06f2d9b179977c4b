import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bellpa.bell import (
    bc,
    chain_box,
    chain_links,
    chsh,
    chsh_tensor_entry,
    chsh_weight_vector,
    evaluate,
    evaluate_tensor,
    find_relabeling,
    functional,
    relabel_box,
)
from bellpa.box import BoxShape, deterministic_box, nosignaling_check, pr_box, tensor, unflat_index, uniform_box, validate_box
from bellpa.errors import InputError
from bellpa.scalar import INV_SQRT2, SQRT2

from conftest import vertex_mixtures


def correlator_chsh(box):
    """CHSH from correlators: √2 (6 − S) / 4 with S = E00 + E01 + E10 − E11."""
    S = 0
    for x, y in itertools.product((0, 1), repeat=2):
        E = sum((1 if a == b else -1) * box.entry(a, b, x, y) for a, b in itertools.product((0, 1), repeat=2))
        S += -E if x == y == 1 else E
    return SQRT2 * (6 - S) / 4


def deterministic_values(f):
    """Functional value on every deterministic strategy pair, as a float array."""
    m = f.shape.settings_a
    C = f.coefficients.astype(np.float64).reshape(m, m, 2, 2)
    strategies = np.array(list(itertools.product((0, 1), repeat=m)))
    # vals[A, B] = Σ_xy C[x, y, A_x, B_y]
    vals = np.zeros((len(strategies), len(strategies)))
    for x in range(m):
        for y in range(m):
            vals += C[x, y][strategies[:, x][:, None], strategies[:, y][None, :]]
    return float(f.scale) * vals, strategies


def test_chsh_reference_values(vertices):
    f = chsh()
    assert evaluate(f, pr_box()) == INV_SQRT2
    assert evaluate(f, uniform_box()) == 3 / SQRT2
    det = [evaluate(f, v) for v in vertices[:16]]
    assert min(det) == SQRT2
    assert max(evaluate(f, v) for v in vertices) == 5 / SQRT2


@given(vertex_mixtures())
def test_chsh_matches_correlator_oracle(box):
    assert evaluate(chsh(), box) == correlator_chsh(box)


def test_chsh_coefficients():
    f = chsh()
    assert f.entry(0, 0, 0, 0) == SQRT2 / 8
    assert f.entry(0, 0, 1, 1) == 5 * SQRT2 / 8
    assert f.entry(0, 1, 1, 1) == SQRT2 / 8
    assert f.exact


@pytest.mark.parametrize("m", range(2, 7))
def test_bc_local_optimum_and_chain_value(m):
    f = bc(m)
    vals, strategies = deterministic_values(f)
    assert abs(vals.min() - np.sqrt(2)) < 1e-12
    i, j = np.unravel_index(int(vals.argmin()), vals.shape)
    box = deterministic_box(tuple(strategies[i]), tuple(strategies[j]), BoxShape(1, 2, 2, m, m))
    assert evaluate(f, box) == SQRT2
    chain = chain_box(m)
    assert validate_box(chain) == [] and nosignaling_check(chain) == []
    assert evaluate(f, chain) == INV_SQRT2
    assert f.local_bound == SQRT2 and f.ns_optimum == INV_SQRT2


@pytest.mark.parametrize("m", range(2, 7))
def test_bc_mod_local_bound_matches_enumeration(m):
    f = bc(m, modified=True)
    assert not f.exact
    vals, _ = deterministic_values(f)
    assert abs(vals.min() - f.local_bound) < 1e-12
    assert abs(float(evaluate(f, chain_box(m))) - 1 / np.sqrt(2)) < 1e-12


def test_chain_links_layout():
    assert chain_links(3) == [(0, 0, False), (0, 1, False), (1, 1, False), (1, 2, False), (2, 0, True), (2, 2, False)]
    f = bc(3)
    assert f.entry(0, 0, 0, 1) == SQRT2 / 12
    assert f.entry(0, 1, 0, 1) == 7 * SQRT2 / 12
    assert f.entry(0, 1, 2, 0) == SQRT2 / 12
    assert f.entry(0, 0, 0, 2) == 0


def test_bc_rejects_small_m():
    with pytest.raises(InputError):
        bc(1)
    with pytest.raises(InputError):
        functional("nope")


def test_bc2_is_chsh_up_to_relabeling():
    r = find_relabeling(bc(2), chsh())
    assert r is not None
    moved = relabel_box(chain_box(2), r)
    assert evaluate(chsh(), moved) == INV_SQRT2
    for box in (uniform_box(), chain_box(2)):
        assert evaluate(bc(2), box) == evaluate(chsh(), relabel_box(box, r))


def test_shape_mismatch():
    with pytest.raises(InputError):
        evaluate(bc(3), pr_box())


@given(vertex_mixtures(), vertex_mixtures())
def test_tensor_value_is_multiplicative(p, q):
    f = chsh()
    assert evaluate(f, tensor([p, q])) == evaluate_tensor(f, [p, q]) == evaluate(f, p) * evaluate(f, q)


@given(st.integers(1, 3), st.data())
def test_tensor_entry_closed_form(n, data):
    shape = BoxShape(n)
    scale, coef = chsh().tensor_power(n)
    weights = chsh_weight_vector(n)
    i = data.draw(st.integers(0, shape.size - 1))
    a, b, x, y = unflat_index(shape, i)
    assert chsh_tensor_entry(a, b, x, y) == scale * int(coef[i]) == SQRT2 ** (-5 * n) * 5 ** int(weights[i])


def test_tensor_entry_example():
    assert chsh_tensor_entry((0, 0), (1, 1), (0, 0), (0, 0)) == Fraction(25, 32)
    with pytest.raises(InputError):
        chsh_tensor_entry((0,), (0, 1), (0,), (0,))


def test_float_box_evaluation():
    v = evaluate(chsh(), pr_box().to_float())
    assert isinstance(v, float) and abs(v - 2**-0.5) < 1e-15


def test_to_dict():
    d = chsh().to_dict()
    assert d["functional"] == "chsh" and len(d["coefficients"]) == 16
    assert d["local_bound"].startswith("√2")
