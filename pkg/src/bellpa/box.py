"""Conditional-probability boxes P(a, b | x, y) over one or more pairs.

Entries are stored flat. For a single pair the index is::

    ((x * settings_b + y) * outcomes_a + a) * outcomes_b + b

i.e. block-major by setting, rows ``a``, columns ``b``, the same layout as
the printed tables. Multi-pair indices concatenate the per-pair indices with
pair 1 most significant, so ``entries.reshape((sa, sb, oa, ob) * N)`` gives
a view with axes ``x1, y1, a1, b1, x2, ...``.

Exact boxes hold ``Fraction``/``QSqrt2`` objects in an ``object`` array;
float boxes hold ``float64``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache, reduce
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError, UnsupportedError
from .scalar import QSqrt2, is_exact, parse_scalar

FLOAT_TOL = 1e-9


@dataclass(frozen=True)
class BoxShape:
    pairs: int = 1
    outcomes_a: int = 2
    outcomes_b: int = 2
    settings_a: int = 2
    settings_b: int = 2

    def __post_init__(self):
        if self.pairs < 1:
            raise InputError("a box needs at least one pair")
        for name in ("outcomes_a", "outcomes_b", "settings_a", "settings_b"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1")

    @property
    def block(self) -> int:
        """Number of entries for a single pair."""
        return self.outcomes_a * self.outcomes_b * self.settings_a * self.settings_b

    @property
    def size(self) -> int:
        return self.block ** self.pairs

    @property
    def pair_axes(self) -> Tuple[int, int, int, int]:
        return (self.settings_a, self.settings_b, self.outcomes_a, self.outcomes_b)

    @property
    def is_binary(self) -> bool:
        return self.pair_axes == (2, 2, 2, 2)

    def single(self) -> "BoxShape":
        return BoxShape(1, self.outcomes_a, self.outcomes_b, self.settings_a, self.settings_b)

    def with_pairs(self, pairs: int) -> "BoxShape":
        return BoxShape(pairs, self.outcomes_a, self.outcomes_b, self.settings_a, self.settings_b)

    def to_dict(self) -> dict:
        return {
            "pairs": self.pairs,
            "outcomes_a": self.outcomes_a,
            "outcomes_b": self.outcomes_b,
            "settings_a": self.settings_a,
            "settings_b": self.settings_b,
        }


def _as_seq(v, pairs):
    if isinstance(v, (int, np.integer)):
        if pairs != 1:
            raise InputError("integer label given for a multi-pair index")
        return (int(v),)
    v = tuple(int(t) for t in v)
    if len(v) != pairs:
        raise InputError(f"expected {pairs} labels, got {len(v)}")
    return v


def flat_index(shape: BoxShape, a, b, x, y) -> int:
    """Flat entry index of ``(a, b, x, y)``; each argument is a label or a per-pair sequence."""
    n = shape.pairs
    a, b, x, y = (_as_seq(t, n) for t in (a, b, x, y))
    idx = 0
    for i in range(n):
        single = ((x[i] * shape.settings_b + y[i]) * shape.outcomes_a + a[i]) * shape.outcomes_b + b[i]
        idx = idx * shape.block + single
    return idx


def unflat_index(shape: BoxShape, index: int):
    """Inverse of :func:`flat_index`; returns per-pair tuples ``(a, b, x, y)``."""
    if not 0 <= index < shape.size:
        raise InputError(f"index {index} out of range for {shape.size} entries")
    a, b, x, y = [], [], [], []
    digits = []
    for _ in range(shape.pairs):
        index, r = divmod(index, shape.block)
        digits.append(r)
    for r in reversed(digits):
        r, bb = divmod(r, shape.outcomes_b)
        r, aa = divmod(r, shape.outcomes_a)
        xx, yy = divmod(r, shape.settings_b)
        a.append(aa)
        b.append(bb)
        x.append(xx)
        y.append(yy)
    return tuple(a), tuple(b), tuple(x), tuple(y)


def _normalise_entries(entries) -> np.ndarray:
    if isinstance(entries, np.ndarray) and entries.dtype != object:
        return np.array(entries, dtype=np.float64)
    flat = list(np.asarray(entries, dtype=object).ravel()) if not isinstance(entries, list) else entries
    if all(is_exact(e) or isinstance(e, np.integer) for e in flat):
        out = np.empty(len(flat), dtype=object)
        for i, e in enumerate(flat):
            out[i] = e if isinstance(e, (Fraction, QSqrt2)) else Fraction(int(e))
        return out
    return np.array([float(e) for e in flat], dtype=np.float64)


def integer_form(values: np.ndarray):
    """Write an exact rational array as ``(numerators, denominator)``.

    Returns ``None`` when some entry is irrational or the array is float.
    The numerators are ``int64`` when they fit, ``object`` otherwise.
    """
    if values.dtype != object:
        return None
    dens = []
    for e in values.ravel():
        if isinstance(e, QSqrt2):
            if e.v != 0:
                return None
            e = e.u
        dens.append(Fraction(e).denominator)
    den = reduce(math.lcm, dens, 1)
    nums = [int(Fraction(e.u if isinstance(e, QSqrt2) else e) * den) for e in values.ravel()]
    if nums and max(abs(n) for n in nums) >= 2**62:
        arr = np.array(nums, dtype=object)
    else:
        arr = np.array(nums, dtype=np.int64)
    return arr.reshape(values.shape), den


def from_integer_form(numerators: np.ndarray, denominator: int) -> np.ndarray:
    """Object array of Fractions ``numerators / denominator``."""
    make = np.frompyfunc(lambda n: Fraction(int(n), denominator), 1, 1)
    return make(numerators).astype(object)


def alice_marginal_array(values: np.ndarray, shape: BoxShape, x=None, y=None) -> np.ndarray:
    """Sum Bob's outcomes out of a flat entry array at fixed settings."""
    n = shape.pairs
    x = _as_seq((0,) * n if x is None else x, n)
    y = _as_seq((0,) * n if y is None else y, n)
    v = values.reshape(shape.pair_axes * n)
    idx = []
    for i in range(n):
        idx += [x[i], y[i], slice(None), slice(None)]
    sub = v[tuple(idx)]
    # remaining axes (a1, b1, a2, b2, ...)
    sub = sub.sum(axis=tuple(range(1, 2 * n, 2)))
    return np.asarray(sub).reshape(-1)


@dataclass(frozen=True, eq=False)
class BoxTable:
    shape: BoxShape
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _normalise_entries(self.entries)
        if arr.ndim != 1:
            arr = arr.ravel()
        if arr.size != self.shape.size:
            raise InputError(
                f"shape {self.shape.to_dict()} needs {self.shape.size} entries, got {arr.size}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def from_integers(cls, shape: BoxShape, numerators, denominator: int) -> "BoxTable":
        nums = np.array(numerators).ravel()
        if nums.size != shape.size:
            raise InputError(f"shape {shape.to_dict()} needs {shape.size} entries, got {nums.size}")
        # one Fraction per distinct numerator; entries are known exact, so skip the scan
        uniq, inverse = np.unique(nums, return_inverse=True)
        fracs = np.empty(len(uniq), dtype=object)
        fracs[:] = [Fraction(int(n), denominator) for n in uniq]
        entries = fracs[inverse.ravel()]
        entries.setflags(write=False)
        box = cls.__new__(cls)
        object.__setattr__(box, "shape", shape)
        object.__setattr__(box, "entries", entries)
        box.__dict__["_int_form"] = (nums, denominator)
        return box

    @property
    def exact(self) -> bool:
        return self.entries.dtype == object

    @property
    def pairs(self) -> int:
        return self.shape.pairs

    def view(self) -> np.ndarray:
        """Entries with axes ``(x1, y1, a1, b1, x2, y2, a2, b2, ...)``."""
        return self.entries.reshape(self.shape.pair_axes * self.shape.pairs)

    def entry(self, a, b, x, y):
        return self.entries[flat_index(self.shape, a, b, x, y)]

    @cached_property
    def _int_form(self):
        return integer_form(self.entries)

    def int_form(self):
        """``(numerators, denominator)`` for rational exact boxes, else ``None``."""
        return self._int_form

    @cached_property
    def _float_box(self) -> "BoxTable":
        form = self.int_form()
        if form is not None:
            vals = form[0].astype(np.float64) / form[1]
        else:
            vals = np.array([float(e) for e in self.entries], dtype=np.float64)
        return BoxTable(self.shape, vals)

    def to_float(self) -> "BoxTable":
        return self._float_box if self.exact else self

    def arith_view(self):
        """``(values, denominator)`` for vectorised checks.

        Rational boxes give integer numerators, float boxes their entries with
        denominator 1, and boxes with irrational entries the object array.
        """
        form = self.int_form()
        if form is not None:
            return form[0], form[1]
        return self.entries, 1

    def equals(self, other: "BoxTable", tol: float = 0.0) -> bool:
        if self.shape != other.shape:
            return False
        if self.exact and other.exact and tol == 0:
            return all(p == q for p, q in zip(self.entries, other.entries))
        diff = np.abs(self.to_float().entries - other.to_float().entries)
        return bool(diff.max() <= tol)

    def alice_marginal(self, x=None, y=None) -> np.ndarray:
        """P(a⃗ | x⃗, y⃗) over Alice's outcome strings (pair 1 most significant).

        Defaults to all-zero settings.
        """
        return alice_marginal_array(self.entries, self.shape, x, y)

    def __repr__(self):
        mode = "exact" if self.exact else "float"
        return f"BoxTable(pairs={self.pairs}, settings={self.shape.settings_a}x{self.shape.settings_b}, {mode})"


@dataclass(frozen=True)
class Violation:
    kind: str
    where: tuple
    magnitude: object

    def to_dict(self) -> dict:
        mag = self.magnitude
        return {"kind": self.kind, "where": list(self.where), "magnitude": float(mag)}


def _default_tol(table_exact: bool, tol):
    if tol is not None:
        return tol
    return 0 if table_exact else FLOAT_TOL


def _settings_rows(table: BoxTable, values=None):
    n = table.pairs
    v = (table.entries if values is None else values).reshape(table.shape.pair_axes * n)
    perm = []
    for i in range(n):
        perm += [4 * i, 4 * i + 1]
    for i in range(n):
        perm += [4 * i + 2, 4 * i + 3]
    s = table.shape
    rows = v.transpose(perm).reshape((s.settings_a * s.settings_b) ** n, -1)
    return rows


def _setting_label(shape: BoxShape, row: int):
    dims = (shape.settings_a, shape.settings_b) * shape.pairs
    vals = np.unravel_index(row, dims)
    return tuple(int(t) for t in vals[0::2]), tuple(int(t) for t in vals[1::2])


def validate_box(table: BoxTable, tol=None) -> List[Violation]:
    """Negativity and per-setting normalisation violations (empty if valid)."""
    tol = _default_tol(table.exact, tol)
    vals, den = table.arith_view()
    rows = _settings_rows(table, vals)
    if rows.dtype == object:
        lows = [min(row) for row in rows]
        sums = [sum(row, Fraction(0)) for row in rows]
    else:
        lows = rows.min(axis=1)
        sums = rows.sum(axis=1)
    out = []
    for r, (lo, total) in enumerate(zip(lows, sums)):
        lo = _scaled(lo, den)
        if lo < -tol:
            out.append(Violation("negativity", _setting_label(table.shape, r), -lo))
        dev = abs(_scaled(total - den, den))
        if dev > tol:
            out.append(Violation("normalization", _setting_label(table.shape, r), dev))
    return out


def _scaled(value, den):
    if den == 1:
        return value.item() if isinstance(value, np.generic) else value
    return Fraction(int(value), den)


def _max_abs(arr):
    if arr.size == 0:
        return 0
    if arr.dtype == object:
        return max(abs(e) for e in arr.ravel())
    if arr.dtype.kind in "iu":
        return int(np.abs(arr).max())
    return float(np.abs(arr).max())


def nosignaling_check(table: BoxTable, tol=None) -> List[Violation]:
    """Per-pair, per-party marginal independence from the party's own setting.

    For every pair ``i`` and each side, summing out that party's outcome must
    give the same array for every value of that party's setting. A violation
    is labelled by the marginal that leaks: ``("alice_marginal", i)`` means
    the rest of the system sees Bob's pair-``i`` setting.
    """
    tol = _default_tol(table.exact, tol)
    vals, den = table.arith_view()
    v = vals.reshape(table.shape.pair_axes * table.pairs)
    out = []
    for i in range(table.pairs):
        for party, setting_ax, outcome_ax in (
            ("bob_marginal", 4 * i, 4 * i + 2),
            ("alice_marginal", 4 * i + 1, 4 * i + 3),
        ):
            marg = v.sum(axis=outcome_ax)
            ref = np.take(marg, [0], axis=setting_ax)
            worst = _scaled(_max_abs(marg - ref), den)
            if worst > tol:
                out.append(Violation("signaling", (party, i), worst))
    return out


# -- standard boxes --------------------------------------------------------

_BIN = BoxShape()
_HALF = Fraction(1, 2)


def box_from_function(fn, shape: BoxShape = _BIN) -> BoxTable:
    """Single-pair box with entries ``fn(a, b, x, y)``."""
    vals = [None] * shape.block
    for x in range(shape.settings_a):
        for y in range(shape.settings_b):
            for a in range(shape.outcomes_a):
                for b in range(shape.outcomes_b):
                    vals[flat_index(shape, a, b, x, y)] = fn(a, b, x, y)
    return BoxTable(shape, vals)


def deterministic_box(alice: Sequence[int], bob: Sequence[int], shape: Optional[BoxShape] = None) -> BoxTable:
    """Box where Alice outputs ``alice[x]`` and Bob outputs ``bob[y]``."""
    shape = shape or BoxShape(1, 2, 2, len(alice), len(bob))
    al, bo = np.asarray(alice, dtype=np.int64), np.asarray(bob, dtype=np.int64)
    if al.size != shape.settings_a or bo.size != shape.settings_b:
        raise InputError("one outcome per setting is required")
    if al.min() < 0 or al.max() >= shape.outcomes_a or bo.min() < 0 or bo.max() >= shape.outcomes_b:
        raise InputError("deterministic outcome out of range")
    nums = np.zeros((shape.settings_a, shape.settings_b, shape.outcomes_a, shape.outcomes_b), dtype=np.int64)
    xs, ys = np.arange(al.size)[:, None], np.arange(bo.size)[None, :]
    nums[xs, ys, al[:, None], bo[None, :]] = 1
    return BoxTable.from_integers(shape, nums, 1)


def pr_box(alpha: int = 0, beta: int = 0, gamma: int = 0) -> BoxTable:
    """PR-type box ``a ⊕ b = x·y ⊕ αx ⊕ βy ⊕ γ`` with uniform marginals."""
    return box_from_function(
        lambda a, b, x, y: _HALF if (a ^ b) == ((x & y) ^ (alpha * x) ^ (beta * y) ^ gamma) else Fraction(0)
    )


def anti_pr_box() -> BoxTable:
    return pr_box(0, 0, 1)


def uniform_box(shape: BoxShape = _BIN) -> BoxTable:
    p = Fraction(1, shape.outcomes_a * shape.outcomes_b)
    return BoxTable(shape, [p] * shape.size)


def signaling_box() -> BoxTable:
    """Alice's outcome copies Bob's setting, Bob's outcome is uniform."""
    return box_from_function(lambda a, b, x, y: _HALF if a == y else Fraction(0))


def ns_vertices_binary() -> List[BoxTable]:
    """The 24 extremal boxes of the binary single-pair nonsignaling polytope.

    The 16 deterministic boxes ``a = αx ⊕ β``, ``b = γy ⊕ δ`` come first, in
    ``(α, β, γ, δ)`` lexicographic order, followed by the 8 PR variants in
    ``(α, β, γ)`` order. Index 16 is the canonical PR box.
    """
    verts = []
    for al, be, ga, de in itertools.product((0, 1), repeat=4):
        verts.append(deterministic_box((be, al ^ be), (de, ga ^ de)))
    for al, be, ga in itertools.product((0, 1), repeat=3):
        verts.append(pr_box(al, be, ga))
    return verts


# -- combination ------------------------------------------------------------

def _common_pair_shape(tables: Sequence[BoxTable]) -> BoxShape:
    if not tables:
        raise InputError("need at least one box")
    s0 = tables[0].shape.single()
    for t in tables[1:]:
        if t.shape.single() != s0:
            raise InputError("boxes have different per-pair shapes")
    return s0


def tensor(tables: Sequence[BoxTable]) -> BoxTable:
    """Product box; pair order follows the sequence order."""
    s0 = _common_pair_shape(tables)
    pairs = sum(t.pairs for t in tables)
    shape = s0.with_pairs(pairs)
    forms = [t.int_form() for t in tables]
    if all(f is not None for f in forms):
        nums = reduce(lambda p, q: np.multiply.outer(p, q).ravel(), [f[0] for f in forms])
        den = math.prod(f[1] for f in forms)
        return BoxTable.from_integers(shape, nums, den)
    if all(t.exact for t in tables):
        ents = reduce(lambda p, q: np.multiply.outer(p, q).ravel(), [t.entries for t in tables])
    else:
        ents = reduce(lambda p, q: np.multiply.outer(p, q).ravel(), [t.to_float().entries for t in tables])
    return BoxTable(shape, ents)


def check_weights(weights) -> list:
    """Parse weights, require them nonnegative and summing to one."""
    ws = [parse_scalar(w) for w in weights]
    if any(w < 0 for w in ws):
        raise InputError("weights must be nonnegative")
    total = sum(ws, Fraction(0))
    if all(is_exact(w) for w in ws):
        if total != 1:
            raise InputError(f"weights sum to {total}, not 1")
    elif abs(float(total) - 1.0) > FLOAT_TOL:
        raise InputError(f"weights sum to {float(total)!r}, not 1")
    return ws


def mix(tables: Sequence[BoxTable], weights) -> BoxTable:
    """Convex combination ``Σ w_i P_i`` of boxes of one shape."""
    if len(tables) != len(weights):
        raise InputError("one weight per box required")
    ws = check_weights(weights)
    shape = tables[0].shape
    if any(t.shape != shape for t in tables):
        raise InputError("mix needs boxes of identical shape")
    exact = all(t.exact for t in tables) and all(is_exact(w) for w in ws)
    if exact:
        forms = [t.int_form() for t in tables]
        if all(f is not None for f in forms) and all(not isinstance(w, QSqrt2) or w.is_rational for w in ws):
            ws_q = [Fraction(w.u) if isinstance(w, QSqrt2) else Fraction(w) for w in ws]
            den = reduce(math.lcm, [f[1] * w.denominator for f, w in zip(forms, ws_q)], 1)
            acc = np.zeros(shape.size, dtype=object)
            for (nums, d), w in zip(forms, ws_q):
                scale = w.numerator * (den // (d * w.denominator))
                acc = acc + nums.astype(object) * scale
            return BoxTable.from_integers(shape, acc, den)
        acc = np.zeros(shape.size, dtype=object)
        acc[:] = Fraction(0)
        for t, w in zip(tables, ws):
            acc = acc + t.entries * w
        return BoxTable(shape, acc)
    acc = np.zeros(shape.size)
    for t, w in zip(tables, ws):
        acc += t.to_float().entries * float(w)
    return BoxTable(shape, acc)


# -- locality -------------------------------------------------------------------

@dataclass(frozen=True)
class LocalModel:
    """Weights over deterministic strategy pairs ``((a_0, a_1), (b_0, b_1))``."""

    weights: Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], object]

    def to_box(self) -> BoxTable:
        items = list(self.weights.items())
        return mix([deterministic_box(al, bo) for (al, bo), _ in items], [w for _, w in items])

    def to_dict(self) -> dict:
        return {
            "weights": [
                {"alice": list(al), "bob": list(bo), "weight": str(w) if is_exact(w) else float(w)}
                for (al, bo), w in sorted(self.weights.items())
            ]
        }


_STRATEGIES = [((a0, a1), (b0, b1)) for a0, a1, b0, b1 in itertools.product((0, 1), repeat=4)]


@lru_cache(maxsize=1)
def _strategy_matrix() -> np.ndarray:
    cols = [deterministic_box(al, bo).to_float().entries for al, bo in _STRATEGIES]
    return np.stack(cols, axis=1)


@lru_cache(maxsize=1)
def _bases():
    """All 9-column subsets of the strategy matrix with full column rank, and their pseudo-inverses."""
    D = _strategy_matrix()
    rank = np.linalg.matrix_rank(D)
    subsets = np.array(list(itertools.combinations(range(D.shape[1]), rank)))
    mats = D[:, subsets].transpose(1, 0, 2)  # (n_subsets, 16, rank)
    ranks = np.linalg.matrix_rank(mats)
    keep = ranks == rank
    subsets, mats = subsets[keep], mats[keep]
    return subsets, mats, np.linalg.pinv(mats)


def _solve_exact(cols: List[List[Fraction]], rhs: List[Fraction]):
    """Exact solution of the (consistent, full column rank) system ``A q = rhs``, else None."""
    n = len(cols)
    rows = [[cols[j][i] for j in range(n)] + [rhs[i]] for i in range(len(rhs))]
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            return None
        rows[r], rows[piv] = rows[piv], rows[r]
        p = rows[r][c]
        rows[r] = [e / p for e in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [e - f * g for e, g in zip(rows[i], rows[r])]
        r += 1
    if any(row[n] != 0 for row in rows[n:]):
        return None
    return [rows[i][n] for i in range(n)]


def is_local(table: BoxTable) -> Tuple[bool, Optional[LocalModel]]:
    """Decide membership in the local polytope for a binary single-pair box.

    Exhaustive support search: every feasible point has a basic solution on
    some set of linearly independent deterministic strategies, so all such
    bases are tried. Exact boxes get an exactly verified witness.
    """
    if table.pairs != 1 or not table.shape.is_binary:
        s = table.shape
        raise UnsupportedError(
            f"locality test supports binary single-pair boxes only "
            f"(got settings {s.settings_a}x{s.settings_b}, outcomes {s.outcomes_a}x{s.outcomes_b}, pairs {s.pairs})"
        )
    subsets, mats, pinvs = _bases()
    p = table.to_float().entries
    q = pinvs @ p  # (n_subsets, rank)
    resid = np.abs(np.einsum("sij,sj->si", mats, q) - p).max(axis=1)
    ok = (resid < 1e-9) & (q.min(axis=1) > -1e-9)
    for s in np.flatnonzero(ok):
        support = [int(j) for j in subsets[s]]
        if table.exact:
            det = [list(deterministic_box(*_STRATEGIES[j]).entries) for j in support]
            sol = _solve_exact(det, list(table.entries))
            if sol is None or any(w < 0 for w in sol):
                continue
            weights = {_STRATEGIES[j]: w for j, w in zip(support, sol) if w != 0}
        else:
            weights = {
                _STRATEGIES[j]: float(max(w, 0.0)) for j, w in zip(support, q[s]) if abs(w) > 1e-12
            }
        return True, LocalModel(weights)
    return False, None
