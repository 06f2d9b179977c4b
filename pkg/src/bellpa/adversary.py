"""Nonsignaling eavesdropping attacks built from convex decompositions.

Eve prepares box ``P^e`` with probability ``q_e`` and keeps ``e``. The
embedded joint has a single Eve setting, so the distinguisher's maximum over
settings is trivial and the quantity reduces to a weighted sum over ``e``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from .bell import chsh, evaluate
from .box import BoxTable, check_weights, nosignaling_check, ns_vertices_binary, tensor, validate_box
from .errors import InputError
from .gamma import Variant, gamma_matrix
from .hashing import HashFunction, _contract_strings, _output_onehot, identity_hash, lemma2_check
from .scalar import describe, to_json, is_exact, parse_scalar
from .security import JointDistribution, comm_bound_rhs, distinguish_lhs, leq, main_bound_rhs

MAX_CHAIN_PAIRS = 4


@dataclass(frozen=True, eq=False)
class AttackEnsemble:
    components: Tuple[Tuple[object, BoxTable], ...]

    def __post_init__(self):
        comps = tuple((w, b) for w, b in self.components)
        if not comps:
            raise InputError("an ensemble needs at least one component")
        ws = check_weights([w for w, _ in comps])
        shape = comps[0][1].shape
        for i, (_, box) in enumerate(comps):
            if box.shape != shape:
                raise InputError(f"component {i} has a different shape")
            if not box.shape.is_binary:
                raise InputError("attack components must be binary boxes")
            diags = validate_box(box) + nosignaling_check(box)
            if diags:
                raise InputError(f"component {i} is not a valid nonsignaling box: {diags[0].to_dict()}")
        object.__setattr__(self, "components", tuple(zip(ws, (b for _, b in comps))))

    @property
    def weights(self) -> list:
        return [w for w, _ in self.components]

    @property
    def boxes(self) -> List[BoxTable]:
        return [b for _, b in self.components]

    @property
    def pairs(self) -> int:
        return self.components[0][1].pairs

    @property
    def exact(self) -> bool:
        return all(is_exact(w) for w in self.weights) and all(b.exact for b in self.boxes)

    def average_box(self) -> BoxTable:
        from .box import mix

        return mix(self.boxes, self.weights)

    def to_dict(self) -> dict:
        from .io import box_to_dict, entry_text

        return {"ensemble": [{"weight": entry_text(w), "box": box_to_dict(b)} for w, b in self.components]}


def ensemble_to_joint(att: AttackEnsemble) -> JointDistribution:
    """``P(a⃗, b⃗, e | x⃗, y⃗) = q_e P^e(a⃗, b⃗ | x⃗, y⃗)`` with one Eve setting."""
    E = len(att.components)
    shape = att.boxes[0].shape
    if att.exact:
        cols = [b.entries * w for w, b in att.components]
        arr = np.empty((shape.size, E), dtype=object)
        for e, col in enumerate(cols):
            arr[:, e] = col
    else:
        arr = np.stack([b.to_float().entries * float(w) for w, b in att.components], axis=1)
    return JointDistribution(shape, E, 1, arr.reshape(-1))


def attack_lhs(att: AttackEnsemble, h: HashFunction):
    """``Σ_e q_e Σ_{c,k} |P^e(c, k | x⃗ = 0) − 2^-n_s P^e(c | x⃗ = 0)|``."""
    if h.n_r != att.pairs:
        raise InputError(f"hash takes {h.n_r} bits but the attack has {att.pairs} pairs")
    exact = att.exact
    total = Fraction(0) if exact else 0.0
    ref_scale = Fraction(1, 2**h.n_s) if exact else 2.0**-h.n_s
    for w, box in att.components:
        marg = box.alice_marginal() if exact else box.to_float().alice_marginal()
        grouped = [Fraction(0) if exact else 0.0] * (2**h.n_out)
        for a, p in enumerate(marg):
            grouped[int(h.table[a])] += p
        part = Fraction(0) if exact else 0.0
        for c in range(2**h.n_c):
            block = grouped[c << h.n_s:(c + 1) << h.n_s]
            pc = sum(block, Fraction(0) if exact else 0.0)
            part += sum(abs(p - ref_scale * pc) for p in block)
        total += (w if exact else float(w)) * part
    return total


# -- vertex-attack optimizer -----------------------------------------------------

@lru_cache(maxsize=1)
def vertex_table():
    """``(vertex boxes, CHSH values, key biases g_v)`` for the 24 single-pair vertices, exact."""
    verts = ns_vertices_binary()
    f = chsh()
    h = identity_hash(1)
    values = [evaluate(f, v) for v in verts]
    gains = [attack_lhs(AttackEnsemble(((1, v),)), h) for v in verts]
    return verts, values, gains


@dataclass(frozen=True)
class AttackOptimum:
    target: object
    ensemble: AttackEnsemble
    d_max: object
    bound: object
    support: Tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "chsh": to_json(self.target),
            "d_max": to_json(self.d_max),
            "bound": to_json(self.bound),
            "support": list(self.support),
            "weights": [to_json(w) for w in self.ensemble.weights],
            "certificate": self.ensemble.to_dict(),
        }


def optimize_vertex_attack(C) -> AttackOptimum:
    """Largest single-pair key bias at CHSH value ``C`` over vertex mixtures.

    Two equality constraints on 24 weights leave basic optima with at most two
    nonzero weights, so singletons and pairs are enumerated. Ties keep the
    first support in vertex order.
    """
    C = parse_scalar(C)
    verts, values, gains = vertex_table()
    exact = is_exact(C)
    if not exact:
        C = float(C)
        values = [float(v) for v in values]
        gains = [float(g) for g in gains]
    lo, hi = min(values), max(values)
    tol = 0 if exact else 1e-12
    if C < lo - tol or C > hi + tol:
        raise InputError(f"CHSH value {describe(C)} is outside the feasible range [{describe(lo)}, {describe(hi)}]")
    best = None
    for v, (c, g) in enumerate(zip(values, gains)):
        if abs(c - C) <= tol and (best is None or g > best[0]):
            best = (g, ((v, 1 if exact else 1.0),))
    for u, v in itertools.combinations(range(len(verts)), 2):
        cu, cv = values[u], values[v]
        if cu == cv or not (min(cu, cv) <= C <= max(cu, cv)):
            continue
        lam = (cv - C) / (cv - cu)
        obj = lam * gains[u] + (1 - lam) * gains[v]
        if best is None or obj > best[0]:
            best = (obj, ((u, lam), (v, 1 - lam)))
    d_max, support = best
    support = tuple((i, w) for i, w in support if w != 0)
    if not exact:
        # renormalise so the certificate's weights sum to one exactly in floating point
        s = sum(w for _, w in support)
        support = tuple((i, w / s) for i, w in support)
    ens = AttackEnsemble(tuple((w, verts[i]) for i, w in support))
    return AttackOptimum(C, ens, d_max, main_bound_rhs(1, 1, C), tuple(i for i, _ in support))


def attack_sweep(lo, hi, n: int) -> List[AttackOptimum]:
    """Optimizer on ``n`` evenly spaced CHSH values in ``[lo, hi]`` (floating point)."""
    if n < 1:
        raise InputError("sweep needs at least one point")
    lo, hi = float(parse_scalar(lo)), float(parse_scalar(hi))
    grid = [lo] if n == 1 else list(np.linspace(lo, hi, n))
    return [optimize_vertex_attack(float(c)) for c in grid]


def random_vertex_ensemble(rng: np.random.Generator, n_r: int, max_components: int = 4) -> AttackEnsemble:
    """Random mixture of products of single-pair vertices with Dirichlet weights."""
    verts = vertex_table()[0]
    k = int(rng.integers(1, max_components + 1))
    boxes = [tensor([verts[int(i)] for i in rng.integers(0, len(verts), size=n_r)]) for _ in range(k)]
    weights = rng.dirichlet(np.ones(k))
    weights = weights / weights.sum()
    return AttackEnsemble(tuple(zip((float(w) for w in weights), boxes)))


# -- proof-chain check ---------------------------------------------------------

@lru_cache(maxsize=512)
def _gamma_offsets(h: HashFunction) -> np.ndarray:
    """``|2^n Γ_{A_o} − 4^-N| · 8^N`` per output ``o`` as integers, ``n = n_s + n_c``."""
    N = h.n_r
    G, _ = gamma_matrix(Variant.PLAIN)
    onehot = _output_onehot(h)
    rows = [_contract_strings(onehot[o], G, N) for o in range(2**h.n_out)]
    return np.abs(np.stack(rows) * (2**h.n_out) - 2**N)


@lru_cache(maxsize=512)
def _lemma2_passed(h: HashFunction) -> bool:
    return lemma2_check(h).passed


@dataclass(frozen=True)
class ChainReport:
    lhs: object
    middle: object
    rhs: object
    lemma2_passed: bool

    @property
    def ordered(self) -> bool:
        return leq(self.lhs, self.middle) and leq(self.middle, self.rhs)

    @property
    def passed(self) -> bool:
        """Ordering holds, or is not asserted because the hash fails the entry-wise lemma."""
        return self.ordered or not self.lemma2_passed

    def to_dict(self) -> dict:
        return {
            "lhs": to_json(self.lhs),
            "middle": to_json(self.middle),
            "rhs": to_json(self.rhs),
            "lemma2_pass": self.lemma2_passed,
            "ordered": self.ordered,
            "asserted": self.lemma2_passed,
            "pass": self.passed,
        }


def bound_chain_check(joint: JointDistribution, h: HashFunction) -> ChainReport:
    """Three independently computed links of the main bound's proof.

    The whole hash output is used as key. ``lhs`` comes from probabilities,
    ``middle`` pairs ``|Γ_{A_o} − 2^-n 4^-N 1|`` with each conditional box,
    and ``rhs`` is the closed-form bound.
    """
    N = joint.pairs
    if N > MAX_CHAIN_PAIRS:
        raise InputError(f"chain check is limited to n_r <= {MAX_CHAIN_PAIRS}")
    lhs, _ = distinguish_lhs(joint, h, concatenated=True)
    offsets = _gamma_offsets(h)
    per_setting = joint.by_entry().sum(axis=2)  # (entries, Z)
    den = 2**h.n_out * 8**N
    if joint.exact:
        paired = np.dot(offsets.astype(object), per_setting)
        middle = sum((max(row) for row in paired), Fraction(0)) / den
    else:
        paired = offsets.astype(np.float64) @ per_setting
        middle = float(paired.max(axis=1).sum()) / den
    value = evaluate(chsh(), joint.average_box())
    rhs = main_bound_rhs(h.n_out, N, value)
    return ChainReport(lhs, middle, rhs, _lemma2_passed(h))


def main_bound_holds(att: AttackEnsemble, h: HashFunction) -> Tuple[object, object, bool]:
    """``(attack_lhs, bound, lhs <= bound)``; the communication bound applies when ``n_c > 0``."""
    lhs = attack_lhs(att, h)
    value = evaluate(chsh(), att.average_box())
    if h.n_c:
        rhs = comm_bound_rhs(h.n_s, h.n_c, h.n_r, value)
    else:
        rhs = main_bound_rhs(h.n_s, h.n_r, value)
    return lhs, rhs, leq(lhs, rhs)
