"""Dual vectors that read Alice's x=0 marginal off a nonsignaling box.

Three families are kept so the derivation chain can be checked end to end:

* ``PRIME``: the plain indicator of ``a`` at ``x = y = 0``, summed over ``b``;
  valid for every box by definition.
* ``DOUBLE_PRIME``: spreads the weight over both of Bob's settings; needs Bob
  not to signal to Alice.
* ``PLAIN``: the symmetric vector with entries in ``{1, -3, 5} / 8``; needs
  every one of Alice's systems not to signal either.

The tables below are kept as printed, row ``2x + a``, column ``2y + b``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Dict

import numpy as np

from .bell import chsh_weight_vector
from .box import BoxShape, BoxTable, alice_marginal_array, flat_index, unflat_index
from .errors import InputError


class Variant(enum.Enum):
    PLAIN = "plain"
    PRIME = "prime"
    DOUBLE_PRIME = "double_prime"


_PRINTED = {
    Variant.PLAIN: (
        Fraction(1, 8),
        [
            [[1, -3, 1, 5], [5, 1, -3, 1], [1, -3, 5, 1], [5, 1, 1, -3]],
            [[1, 5, 1, -3], [-3, 1, 5, 1], [1, 5, -3, 1], [-3, 1, 1, 5]],
        ],
    ),
    Variant.PRIME: (
        Fraction(1),
        [
            [[1, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]],
            [[0, 0, 0, 0], [1, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]],
        ],
    ),
    Variant.DOUBLE_PRIME: (
        Fraction(1, 4),
        [
            [[2, 2, 2, 2], [0, 0, 0, 0], [-1, -1, 1, 1], [1, 1, -1, -1]],
            [[0, 0, 0, 0], [2, 2, 2, 2], [1, 1, -1, -1], [-1, -1, 1, 1]],
        ],
    ),
}

_SHAPE = BoxShape()


def _from_printed(table, transposed=False) -> np.ndarray:
    out = np.zeros(16, dtype=np.int64)
    for a, b, x, y in itertools.product((0, 1), repeat=4):
        r, c = 2 * x + a, 2 * y + b
        out[flat_index(_SHAPE, a, b, x, y)] = table[c][r] if transposed else table[r][c]
    return out


@lru_cache(maxsize=None)
def _gamma_matrix(variant: Variant, as_printed: bool):
    scale, tables = _PRINTED[variant]
    flip = variant is Variant.PLAIN and not as_printed
    G = np.stack([_from_printed(t, flip) for t in tables])
    G.setflags(write=False)
    return G, scale


def gamma_matrix(variant: Variant = Variant.PLAIN, as_printed: bool = False):
    """``(G, scale)`` with ``G`` a 2x16 integer matrix; row ``k`` is ``γ_k / scale``.

    The printed ``PLAIN`` table, read in the box layout, returns Bob's
    ``y = 0`` marginal instead of Alice's ``x = 0`` one; it is used
    transposed. ``as_printed=True`` gives the untransposed reading.
    """
    return _gamma_matrix(Variant(variant), bool(as_printed))


def gamma(variant: Variant, bit: int) -> np.ndarray:
    """The 16 exact entries of ``γ_bit`` for the given variant."""
    if bit not in (0, 1):
        raise InputError("bit must be 0 or 1")
    G, scale = gamma_matrix(variant)
    out = np.empty(16, dtype=object)
    for i, c in enumerate(G[bit]):
        out[i] = scale * int(c)
    return out


def _split_index(index, n):
    if isinstance(index, (int, np.integer)):
        shape = _SHAPE.with_pairs(n)
        a, b, x, y = unflat_index(shape, int(index))
        return [flat_index(_SHAPE, a[i], b[i], x[i], y[i]) for i in range(n)]
    a, b, x, y = index
    if isinstance(a, int):
        a, b, x, y = (a,), (b,), (x,), (y,)
    if not len(a) == len(b) == len(x) == len(y) == n:
        raise InputError("index length does not match the key string")
    return [flat_index(_SHAPE, a[i], b[i], x[i], y[i]) for i in range(n)]


def gamma_tensor_entry(a_bits, index, variant: Variant = Variant.PLAIN) -> Fraction:
    """``Γ_a`` at one entry: the product of per-pair ``γ_{a_i}`` entries.

    ``index`` is a flat index into the ``16^N`` entries or a tuple of
    per-pair ``(a, b, x, y)`` sequences.
    """
    a_bits = tuple(a_bits)
    parts = _split_index(index, len(a_bits))
    G, scale = gamma_matrix(variant)
    num = 1
    for bit, j in zip(a_bits, parts):
        num *= int(G[bit, j])
    return scale ** len(a_bits) * num


def gamma_tensor_ints(n: int, variant: Variant = Variant.PLAIN) -> np.ndarray:
    """All ``Γ_a`` at once as a ``(2^n, 16^n)`` integer array, scaled by ``scale^-n``."""
    G, _ = gamma_matrix(variant)
    rows = []
    for bits in itertools.product((0, 1), repeat=n):
        rows.append(reduce(lambda p, q: np.multiply.outer(p, q).ravel(), [G[b] for b in bits]))
    return np.stack(rows)


def contract(box_tensor: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Apply ``G`` (k x 16) along each pair axis of a ``(16,)*N`` array."""
    t = box_tensor
    for _ in range(box_tensor.ndim):
        t = np.tensordot(t, G.T, axes=([0], [0]))
    return t


@dataclass(frozen=True)
class Lemma1Report:
    discrepancies: Dict[Variant, object]

    @property
    def max_discrepancy(self):
        return max(self.discrepancies.values())

    @property
    def passed(self) -> bool:
        return all(d == 0 for d in self.discrepancies.values())

    def to_dict(self) -> dict:
        return {
            "discrepancies": {v.value: _num(d) for v, d in self.discrepancies.items()},
            "max_discrepancy": _num(self.max_discrepancy),
            "pass": self.passed,
        }


def _num(x):
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else str(x)
    return float(x)


def lemma1_discrepancy(box: BoxTable, variant: Variant = Variant.PLAIN, as_printed: bool = False):
    """``max_a |⟨Γ_a|P⟩ - P(a | x=0, y=0)|`` for one variant.

    The reference marginal is read straight from the table at ``y = 0``.
    """
    if not box.shape.is_binary:
        raise InputError("dual vectors are defined for binary boxes")
    n = box.pairs
    G, scale = gamma_matrix(variant, as_printed)
    form = box.int_form()
    if form is not None:
        nums, den = form
        paired = contract(nums.reshape((16,) * n), G).reshape(-1)
        direct = alice_marginal_array(nums, box.shape)
        s_den = scale.denominator ** n
        s_num = scale.numerator ** n
        # ⟨Γ_a|P⟩ = paired * s_num / (s_den * den); marginal = direct / den
        diff = [abs(int(p) * s_num - int(d) * s_den) for p, d in zip(paired, direct)]
        return Fraction(max(diff), s_den * den)
    ents = box.to_float().entries
    paired = contract(ents.reshape((16,) * n), G.astype(np.float64)).reshape(-1) * float(scale) ** n
    direct = box.to_float().alice_marginal()
    return float(np.abs(paired - direct).max())


def lemma1_check(box: BoxTable) -> Lemma1Report:
    """Discrepancy of the marginal identity for all three variants."""
    return Lemma1Report({v: lemma1_discrepancy(box, v) for v in Variant})


def gamma_completeness_check(n: int) -> bool:
    """``Σ_a Γ_a = 4^-n`` at every one of the ``16^n`` entries, exactly."""
    if n > 4:
        raise InputError("exhaustive completeness check is limited to n <= 4")
    total = gamma_tensor_ints(n).sum(axis=0)
    # Γ scaled by 8^n, target 4^-n * 8^n = 2^n
    return bool(np.all(total == 2**n))


def gamma_entry_bound(n: int) -> Fraction:
    """``max |Γ_a(e)| * 8^n * 5^-M(e)`` over all strings and entries; should be 1."""
    ints = np.abs(gamma_tensor_ints(n)).max(axis=0)
    weights = chsh_weight_vector(n)
    return max(Fraction(int(g), 5 ** int(w)) for g, w in zip(ints, weights))
