"""CHSH and Braunstein-Caves chained Bell functionals.

Functionals are stored as ``scale * coefficients`` with an exact scalar
``scale`` and integer coefficients (float coefficients for the modified
chain), so tensor powers and evaluations stay exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Optional, Sequence

import numpy as np

from .box import BoxShape, BoxTable, box_from_function, flat_index
from .errors import InputError
from .scalar import INV_SQRT2, SQRT2, sqrt2_pow

CHSH = "chsh"
BC = "bc"
BC_MOD = "bc-mod"


@dataclass(frozen=True, eq=False)
class BellFunctional:
    kind: str
    m: int
    shape: BoxShape
    scale: object
    coefficients: np.ndarray = field(repr=False)
    local_bound: object
    ns_optimum: object

    def __post_init__(self):
        self.coefficients.setflags(write=False)

    @property
    def exact(self) -> bool:
        return self.coefficients.dtype != np.float64

    def entry(self, a, b, x, y):
        return self.scale * _py(self.coefficients[flat_index(self.shape, a, b, x, y)])

    def vector(self) -> np.ndarray:
        """Entries in the normative index order (object array when exact)."""
        if self.exact:
            out = np.empty(self.shape.block, dtype=object)
            for i, c in enumerate(self.coefficients):
                out[i] = self.scale * int(c)
            return out
        return float(self.scale) * self.coefficients

    def tensor_power(self, n: int):
        """``(scale**n, coefficients⊗n)`` for the n-fold product functional."""
        return _tensor_power(self, n)

    def to_dict(self) -> dict:
        from .scalar import describe

        return {
            "functional": self.kind,
            "m": self.m,
            "scale": describe(self.scale),
            "coefficients": [int(c) if self.exact else float(c) for c in self.coefficients],
            "local_bound": describe(self.local_bound),
            "ns_optimum": describe(self.ns_optimum),
        }


@lru_cache(maxsize=32)
def _tensor_power(f: BellFunctional, n: int):
    coef = reduce(lambda p, q: np.multiply.outer(p, q).ravel(), [f.coefficients] * n)
    coef.setflags(write=False)
    return f.scale ** n, coef


def _py(c):
    return int(c) if isinstance(c, (np.integer, int)) else float(c)


@lru_cache(maxsize=None)
def chsh() -> BellFunctional:
    """CHSH with weight 1 where ``a ⊕ b = x·y`` and 5 elsewhere, times 1/(4√2)."""
    shape = BoxShape()
    coef = np.zeros(shape.block, dtype=np.int64)
    for a, b, x, y in itertools.product((0, 1), repeat=4):
        coef[flat_index(shape, a, b, x, y)] = 1 if (a ^ b) == (x & y) else 5
    return BellFunctional(CHSH, 2, shape, SQRT2 / 8, coef, SQRT2, INV_SQRT2)


def chain_links(m: int):
    """Setting pairs of the chain as ``(x, y, flipped)``.

    Row ``x`` carries blocks at columns ``x`` and ``x + 1``; the last row
    wraps around to column 0 with the flipped pattern.
    """
    links = [(i, i, False) for i in range(m)]
    links += [(i, i + 1, False) for i in range(m - 1)]
    links.append((m - 1, 0, True))
    return sorted(links)


@lru_cache(maxsize=64)
def bc(m: int, modified: bool = False) -> BellFunctional:
    """Braunstein-Caves chained functional with ``m`` settings per side.

    ``alpha = 2m + 1``; with ``modified`` it is ``sqrt(1 + 4 m^2)`` and the
    coefficients become floats.
    """
    if m < 2:
        raise InputError(f"chained functional needs m >= 2, got {m}")
    shape = BoxShape(1, 2, 2, m, m)
    alpha = math.sqrt(1 + 4 * m * m) if modified else 2 * m + 1
    coef = np.zeros(shape.block, dtype=np.float64 if modified else np.int64)
    for x, y, flipped in chain_links(m):
        for a, b in itertools.product((0, 1), repeat=2):
            same = a == b
            coef[flat_index(shape, a, b, x, y)] = 1 if same != flipped else alpha
    scale = SQRT2 / (4 * m)
    if modified:
        local = (2 * m - 1 + alpha) / (2 * math.sqrt(2) * m)
        return BellFunctional(BC_MOD, m, shape, scale, coef, local, INV_SQRT2)
    return BellFunctional(BC, m, shape, scale, coef, SQRT2, INV_SQRT2)


def functional(kind: str, m: int = 2) -> BellFunctional:
    if kind == CHSH:
        return chsh()
    if kind == BC:
        return bc(m)
    if kind == BC_MOD:
        return bc(m, modified=True)
    raise InputError(f"unknown functional {kind!r}")


def chsh_tensor_entry(a: Sequence[int], b: Sequence[int], x: Sequence[int], y: Sequence[int]):
    """Entry of the N-fold CHSH product: ``2^(-5N/2) * 5^‖a⊕b⊕x·y‖``."""
    if not len(a) == len(b) == len(x) == len(y):
        raise InputError("bit strings of unequal length")
    n = len(a)
    weight = sum((ai ^ bi ^ (xi & yi)) for ai, bi, xi, yi in zip(a, b, x, y))
    return sqrt2_pow(-5 * n) * 5 ** weight


def chsh_weight_vector(n: int) -> np.ndarray:
    """``‖a⊕b⊕x·y‖`` for every entry of an n-pair binary box, in index order."""
    single = np.zeros(16, dtype=np.int64)
    shape = BoxShape()
    for a, b, x, y in itertools.product((0, 1), repeat=4):
        single[flat_index(shape, a, b, x, y)] = a ^ b ^ (x & y)
    return reduce(lambda p, q: np.add.outer(p, q).ravel(), [single] * n)


def _int_dot(coef: np.ndarray, nums: np.ndarray) -> int:
    bound = float(np.abs(coef).max()) * float(np.abs(nums).max() if nums.size else 0) * coef.size
    if bound < 2**62 and nums.dtype != object:
        return int(np.dot(coef.astype(np.int64), nums))
    return int(np.dot(coef.astype(object), nums.astype(object)))


def evaluate(f: BellFunctional, box: BoxTable):
    """``⟨f^{⊗N} | P⟩`` for an N-pair box."""
    if box.shape.single() != f.shape:
        raise InputError(
            f"functional expects {f.shape.settings_a}x{f.shape.settings_b} settings, "
            f"box has {box.shape.settings_a}x{box.shape.settings_b}"
        )
    scale, coef = f.tensor_power(box.pairs)
    if f.exact and box.exact:
        form = box.int_form()
        if form is not None:
            nums, den = form
            return scale * Fraction(_int_dot(coef, nums), den)
        total = sum((int(c) * e for c, e in zip(coef, box.entries) if c), Fraction(0))
        return scale * total
    return float(scale) * float(np.dot(coef.astype(np.float64), box.to_float().entries))


def evaluate_tensor(f: BellFunctional, factors: Sequence[BoxTable]):
    """Value on the product of ``factors``: the product of per-factor values."""
    return reduce(lambda p, q: p * q, [evaluate(f, t) for t in factors])


def chain_box(m: int) -> BoxTable:
    """Nonsignaling box that follows every chain link perfectly.

    Linked settings are perfectly correlated (anti-correlated on the
    wraparound link) with uniform marginals; unlinked settings are uniform.
    """
    flips = {(x, y): fl for x, y, fl in chain_links(m)}
    half, quarter = Fraction(1, 2), Fraction(1, 4)

    def p(a, b, x, y):
        if (x, y) not in flips:
            return quarter
        return half if (a == b) != flips[(x, y)] else Fraction(0)

    return box_from_function(p, BoxShape(1, 2, 2, m, m))


# -- relabelings --------------------------------------------------------------

@dataclass(frozen=True)
class Relabeling:
    """Setting permutations and setting-dependent outcome flips.

    A box entry ``(a, b, x, y)`` is sent to
    ``(a ⊕ flip_a[x], b ⊕ flip_b[y], perm_x[x], perm_y[y])``.
    """

    perm_x: tuple
    perm_y: tuple
    flip_a: tuple
    flip_b: tuple

    def apply(self, a, b, x, y):
        return a ^ self.flip_a[x], b ^ self.flip_b[y], self.perm_x[x], self.perm_y[y]


def find_relabeling(src: BellFunctional, dst: BellFunctional) -> Optional[Relabeling]:
    """Search for a relabeling with ``dst.entry(*r.apply(i)) == src.entry(i)`` for every entry."""
    if src.shape != dst.shape:
        return None
    sa, sb = src.shape.settings_a, src.shape.settings_b
    src_vals = src.vector()
    dst_vals = dst.vector()
    for px in itertools.permutations(range(sa)):
        for py in itertools.permutations(range(sb)):
            for fa in itertools.product((0, 1), repeat=sa):
                for fb in itertools.product((0, 1), repeat=sb):
                    r = Relabeling(px, py, fa, fb)
                    ok = True
                    for a, b, x, y in itertools.product((0, 1), (0, 1), range(sa), range(sb)):
                        i = flat_index(src.shape, a, b, x, y)
                        j = flat_index(dst.shape, *r.apply(a, b, x, y))
                        if src_vals[i] != dst_vals[j]:
                            ok = False
                            break
                    if ok:
                        return r
    return None


def relabel_box(box: BoxTable, r: Relabeling) -> BoxTable:
    """Box ``Q`` with ``Q(r(a, b, x, y)) = P(a, b, x, y)`` (single pair)."""
    if box.pairs != 1:
        raise InputError("relabeling is defined for single-pair boxes")
    out = [None] * box.shape.block
    s = box.shape
    for a, b, x, y in itertools.product(range(s.outcomes_a), range(s.outcomes_b), range(s.settings_a), range(s.settings_b)):
        out[flat_index(s, *r.apply(a, b, x, y))] = box.entry(a, b, x, y)
    return BoxTable(s, out if box.exact else np.array(out, dtype=np.float64))
