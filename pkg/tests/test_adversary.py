import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from bellpa.adversary import (
    AttackEnsemble,
    attack_lhs,
    attack_sweep,
    bound_chain_check,
    ensemble_to_joint,
    main_bound_holds,
    optimize_vertex_attack,
    random_vertex_ensemble,
    vertex_table,
)
from bellpa.bell import chsh, evaluate
from bellpa.box import mix, nosignaling_check, tensor
from bellpa.errors import InputError
from bellpa.hashing import constant_hash, hash_from_seed, identity_hash
from bellpa.scalar import INV_SQRT2, SQRT2
from bellpa.security import distinguish_lhs, main_bound_rhs

from conftest import VERTICES

PR, DET = VERTICES[16], VERTICES[0]


@st.composite
def ensembles(draw, pairs=1, max_components=4):
    k = draw(st.integers(1, max_components))
    boxes = [tensor([VERTICES[draw(st.integers(0, 23))] for _ in range(pairs)]) for _ in range(k)]
    raw = [draw(st.integers(1, 30)) for _ in range(k)]
    return AttackEnsemble(tuple((Fraction(r, sum(raw)), b) for r, b in zip(raw, boxes)))


# -- ensemble plumbing -------------------------------------------------------

def test_single_component_embedding():
    joint = ensemble_to_joint(AttackEnsemble(((1, PR),)))
    assert joint.eve_outcomes == 1 and joint.eve_settings == 1
    assert list(joint.entries) == list(PR.entries)


def test_two_pr_components_are_nonsignaling():
    att = AttackEnsemble(((Fraction(1, 3), PR), (Fraction(2, 3), VERTICES[17])))
    joint = ensemble_to_joint(att)
    assert joint.diagnostics == []
    assert joint.average_box().entries.tolist() == mix(att.boxes, att.weights).entries.tolist()


def test_ensemble_rejects_bad_input():
    from bellpa.box import signaling_box

    with pytest.raises(InputError):
        AttackEnsemble(())
    with pytest.raises(InputError):
        AttackEnsemble(((Fraction(1, 2), PR), (Fraction(1, 3), DET)))
    with pytest.raises(InputError):
        AttackEnsemble(((1, signaling_box()),))
    with pytest.raises(InputError):
        AttackEnsemble(((Fraction(1, 2), PR), (Fraction(1, 2), tensor([PR, PR]))))


# -- left side -----------------------------------------------------------------

def test_attack_lhs_examples():
    h = identity_hash(1)
    assert attack_lhs(AttackEnsemble(((Fraction(1, 2), PR), (Fraction(1, 2), VERTICES[20]))), h) == 0
    assert attack_lhs(AttackEnsemble(((1, DET),)), h) == 1


@pytest.mark.parametrize("lam", [Fraction(k, 10) for k in range(11)])
def test_attack_lhs_linear_in_weights(lam):
    comps = tuple((w, b) for w, b in ((lam, DET), (1 - lam, PR)) if w)
    assert attack_lhs(AttackEnsemble(comps), identity_hash(1)) == lam


def test_attack_lhs_pair_mismatch():
    with pytest.raises(InputError):
        attack_lhs(AttackEnsemble(((1, PR),)), identity_hash(2))


@given(ensembles(pairs=2), st.integers(0, 500), st.integers(0, 1))
def test_attack_lhs_matches_joint_route(att, seed, n_c):
    h = hash_from_seed(2, 1, n_c, seed)
    D, _ = distinguish_lhs(ensemble_to_joint(att), h)
    assert attack_lhs(att, h) == D


def test_float_ensemble_matches_exact():
    exact = AttackEnsemble(((Fraction(1, 4), DET), (Fraction(3, 4), VERTICES[5])))
    approx = AttackEnsemble(((0.25, DET), (0.75, VERTICES[5])))
    h = identity_hash(1)
    assert attack_lhs(approx, h) == pytest.approx(float(attack_lhs(exact, h)), abs=1e-15)


# -- vertex optimizer ------------------------------------------------------------

def test_vertex_table():
    _, values, gains = vertex_table()
    # deterministic boxes reach CHSH sum ±2, PR variants ±4, so values are √2 (6 − S) / 4
    assert {values[i] for i in range(16)} == {SQRT2, 2 * SQRT2}
    assert {values[i] for i in range(16, 24)} == {INV_SQRT2, 5 * INV_SQRT2, 3 * INV_SQRT2}
    assert all(g == 1 for g in gains[:16]) and all(g == 0 for g in gains[16:])
    assert values[16] == INV_SQRT2 and values.count(INV_SQRT2) == 1
    assert max(values) == 5 * INV_SQRT2


def test_optimizer_examples():
    lo = optimize_vertex_attack(INV_SQRT2)
    assert lo.d_max == 0 and lo.support == (16,)
    hi = optimize_vertex_attack(SQRT2)
    assert hi.d_max == 1
    mid = optimize_vertex_attack(1)
    assert mid.d_max == SQRT2 - 1 and mid.bound == 2
    assert isinstance(optimize_vertex_attack(1.0).d_max, float)


def test_optimizer_certificate_reaches_target():
    for C in (Fraction(9, 10), Fraction(13, 10), 2 * INV_SQRT2 + Fraction(1, 7)):
        opt = optimize_vertex_attack(C)
        assert evaluate(chsh(), opt.ensemble.average_box()) == C
        assert attack_lhs(opt.ensemble, identity_hash(1)) == opt.d_max


@pytest.mark.parametrize("C", [0.7, 3.6, "1/2"])
def test_optimizer_infeasible(C):
    with pytest.raises(InputError):
        optimize_vertex_attack(C)


def lp_oracle(C):
    _, values, gains = vertex_table()
    res = linprog(
        -np.array([float(g) for g in gains]),
        A_eq=np.array([[1.0] * 24, [float(v) for v in values]]),
        b_eq=[1.0, float(C)],
        bounds=[(0, None)] * 24,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    assert res.status == 0
    return -res.fun


@pytest.mark.parametrize("C", np.linspace(1 / math.sqrt(2), 5 / math.sqrt(2), 25))
def test_optimizer_matches_lp_oracle(C):
    assert optimize_vertex_attack(float(C)).d_max == pytest.approx(lp_oracle(C), abs=1e-9)


def test_no_grid_mixture_beats_optimizer():
    # dense grid of two-vertex mixtures, plus random triples
    _, values, gains = vertex_table()
    vals = np.array([float(v) for v in values])
    gs = np.array([float(g) for g in gains])
    lam = np.linspace(0, 1, 10_000)
    worst = -1.0
    for u, v in itertools.combinations(range(24), 2):
        cs = lam * vals[u] + (1 - lam) * vals[v]
        ds = lam * gs[u] + (1 - lam) * gs[v]
        for c, d in zip(cs[::97], ds[::97]):
            worst = max(worst, d - optimize_vertex_attack(float(c)).d_max)
    rng = np.random.default_rng(3)
    for _ in range(300):
        idx = rng.choice(24, size=3, replace=False)
        w = rng.dirichlet(np.ones(3))
        worst = max(worst, float(w @ gs[idx]) - optimize_vertex_attack(float(w @ vals[idx])).d_max)
    assert worst <= 1e-12


def test_optimum_below_bound():
    for opt in attack_sweep(INV_SQRT2, 5 * INV_SQRT2, 40):
        assert opt.d_max <= opt.bound + 1e-12
        assert opt.bound == pytest.approx(2 * float(opt.target))


def test_sweep_edges():
    assert len(attack_sweep(1, 1, 1)) == 1
    with pytest.raises(InputError):
        attack_sweep(1, 2, 0)


def test_certificate_round_trip():
    from bellpa.io import ensemble_from_dict

    opt = optimize_vertex_attack(Fraction(6, 5))
    back = ensemble_from_dict(opt.to_dict()["certificate"])
    assert back.weights == opt.ensemble.weights


# -- proof chain ---------------------------------------------------------------

def test_chain_pr_and_deterministic():
    h = identity_hash(1)
    pr = bound_chain_check(ensemble_to_joint(AttackEnsemble(((1, PR),))), h)
    assert pr.lhs == 0 and 0 <= pr.middle <= SQRT2 and pr.rhs == SQRT2 and pr.passed
    det = bound_chain_check(ensemble_to_joint(AttackEnsemble(((1, DET),))), h)
    assert det.lhs == 1 and det.rhs == 2 * SQRT2 and det.ordered


@pytest.mark.parametrize("lam", [Fraction(k, 10) for k in range(11)])
def test_chain_on_mixture_grid(lam):
    comps = tuple((w, b) for w, b in ((lam, DET), (1 - lam, PR)) if w)
    r = bound_chain_check(ensemble_to_joint(AttackEnsemble(comps)), identity_hash(1))
    assert r.lemma2_passed and r.ordered


@given(ensembles(pairs=2), st.integers(0, 200))
def test_chain_on_random_attacks(att, seed):
    h = hash_from_seed(2, 1, 0, seed)
    r = bound_chain_check(ensemble_to_joint(att), h)
    assert r.passed
    lhs, rhs, ok = main_bound_holds(att, h)
    assert ok and lhs == r.lhs


def test_chain_reports_but_does_not_assert_failing_hash():
    # constant hash on three pairs fails the entry-wise lemma; three PR boxes
    h = constant_hash(3, 1)
    att = AttackEnsemble(((1, tensor([PR, PR, PR])),))
    r = bound_chain_check(ensemble_to_joint(att), h)
    assert not r.lemma2_passed and r.passed
    d = r.to_dict()
    assert d["asserted"] is False


def test_chain_on_multi_setting_joint():
    from test_security import joint_from_decompositions

    half = Fraction(1, 2)
    avg = mix([DET, PR], [half, half])
    joint = joint_from_decompositions([[(half, DET), (half, PR)], [(Fraction(1), avg)]], avg.shape)
    r = bound_chain_check(joint, identity_hash(1))
    assert r.lhs == half and r.ordered


def test_random_ensembles_are_valid():
    rng = np.random.default_rng(0)
    for n_r in (1, 2, 3):
        att = random_vertex_ensemble(rng, n_r)
        assert att.pairs == n_r and not nosignaling_check(att.average_box())


def test_main_bound_with_communication():
    att = AttackEnsemble(((1, tensor([DET, DET])),))
    h = hash_from_seed(2, 1, 1, 4)
    lhs, rhs, ok = main_bound_holds(att, h)
    assert ok and rhs == 2 * SQRT2 ** 2 * main_bound_rhs(0, 2, 2)
