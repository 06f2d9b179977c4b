import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bellpa.bell import chsh, evaluate
from bellpa.box import is_local, nosignaling_check, validate_box
from bellpa.errors import InputError
from bellpa.quantum import (
    MeasurementLayout,
    bc_value_quantum,
    bhk_rate,
    bhk_sweep,
    key_agreement,
    singlet_box,
)

CIRELSON = 3 / math.sqrt(2) - 1


def closed_form(m):
    p = math.cos(math.pi / (4 * m)) ** 2
    return (p + (2 * m + 1) * (1 - p)) / math.sqrt(2)


def test_chsh_layout_saturates():
    box = singlet_box(MeasurementLayout.chsh())
    assert float(evaluate(chsh(), box)) == pytest.approx(CIRELSON, abs=1e-12)
    assert abs(CIRELSON - 1.12132) < 1e-5
    assert not is_local(box)[0]


def test_m2_chained_coincides_with_cirelson():
    assert bc_value_quantum(2) == pytest.approx(CIRELSON, abs=1e-12)


@pytest.mark.parametrize("m,value", [(2, 1.12132), (10, 0.79416), (100, 0.71583)])
def test_checkpoints(m, value):
    assert bc_value_quantum(m) == pytest.approx(value, abs=1e-5)


@pytest.mark.parametrize("m", [2, 3, 5, 10, 37, 100, 200])
def test_closed_form_oracle(m):
    assert bc_value_quantum(m) == pytest.approx(closed_form(m), abs=1e-9)


def test_monotone_and_bracketed():
    vals = [bc_value_quantum(m) for m in range(2, 201)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(1 / math.sqrt(2) < v < math.sqrt(2) for v in vals)
    rates = [bhk_rate(m) for m in range(2, 201)]
    assert all(a < b for a, b in zip(rates, rates[1:]))
    assert rates[-1] < 1


def test_rates():
    assert bhk_rate(2) == pytest.approx(-0.330, abs=1e-3)
    assert bhk_rate(100) == pytest.approx(0.965, abs=1e-3)
    # the gap to one bit shrinks like 1/m
    gaps = [1 - bhk_rate(m) for m in (100, 1000)]
    assert gaps[1] < gaps[0] / 9 and gaps[1] < 4e-3
    assert bhk_rate(100, n_c=3, n_r=10) == pytest.approx(bhk_rate(100) - 0.3)


def test_key_agreement_approaches_one():
    ks = [key_agreement(m) for m in (2, 10, 100, 1000)]
    assert all(a < b for a, b in zip(ks, ks[1:]))
    assert ks[-1] > 1 - 1e-5
    assert key_agreement(7) == pytest.approx(math.cos(math.pi / 28) ** 2)


@pytest.mark.parametrize("m", [2, 3, 8])
def test_singlet_box_is_nonsignaling(m):
    box = singlet_box(MeasurementLayout.chained(m))
    assert validate_box(box, tol=1e-15) == []
    assert nosignaling_check(box, tol=1e-12) == []


@given(st.lists(st.floats(0, 2 * math.pi), min_size=4, max_size=4))
def test_cirelson_floor_random_angles(angles):
    box = singlet_box(MeasurementLayout(tuple(angles[:2]), tuple(angles[2:])))
    assert float(evaluate(chsh(), box)) >= CIRELSON - 1e-12


def test_cirelson_floor_grid():
    grid = np.linspace(0, 2 * math.pi, 17)
    best = min(
        float(evaluate(chsh(), singlet_box(MeasurementLayout((a0, a1), (b0, b1)))))
        for a0 in grid[:1] for a1 in grid for b0 in grid for b1 in grid
    )
    assert best >= CIRELSON - 1e-12
    assert best == pytest.approx(CIRELSON, abs=1e-12)


def test_sweep_rows():
    rows = bhk_sweep([2, 10])
    assert [r["m"] for r in rows] == [2, 10]
    assert rows[1]["rate"] == pytest.approx(bhk_rate(10))


def test_bad_inputs():
    with pytest.raises(InputError):
        MeasurementLayout.chained(1)
    with pytest.raises(InputError):
        bhk_rate(3, n_r=0)
