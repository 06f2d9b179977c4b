"""Distinguishing advantage, security bounds and key rates.

A :class:`JointDistribution` is ``P(a⃗, b⃗, e | x⃗, y⃗, z)``. Its flat index is
``(box_index * Z + z) * E + e``, with ``box_index`` in the box convention,
so ``entries.reshape(box.size, Z, E)`` separates Eve's labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import List

import numpy as np

from .bell import chsh, evaluate
from .box import FLOAT_TOL, BoxShape, BoxTable, Violation, _normalise_entries, _max_abs
from .errors import InputError
from .hashing import HashFunction
from .scalar import to_json, is_exact, log2_exact, parse_scalar, sqrt2_pow, sqrt_count


class SignalingError(InputError):
    """Raised when a joint distribution violates the required no-signaling structure."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True, eq=False)
class JointDistribution:
    shape: BoxShape
    eve_outcomes: int
    eve_settings: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.eve_outcomes < 1 or self.eve_settings < 1:
            raise InputError("Eve needs at least one outcome and one setting")
        arr = _normalise_entries(self.entries)
        want = self.shape.size * self.eve_outcomes * self.eve_settings
        if arr.size != want:
            raise InputError(f"joint needs {want} entries, got {arr.size}")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def from_box(cls, box: BoxTable) -> "JointDistribution":
        """Box with a trivial Eve (one setting, one outcome)."""
        return cls(box.shape, 1, 1, box.entries)

    @property
    def exact(self) -> bool:
        return self.entries.dtype == object

    @property
    def pairs(self) -> int:
        return self.shape.pairs

    def view(self) -> np.ndarray:
        return self.entries.reshape(self.shape.pair_axes * self.pairs + (self.eve_settings, self.eve_outcomes))

    def by_entry(self) -> np.ndarray:
        """Entries as ``(box_index, z, e)``."""
        return self.entries.reshape(self.shape.size, self.eve_settings, self.eve_outcomes)

    def average_box(self, z: int = 0) -> BoxTable:
        """``P(a⃗, b⃗ | x⃗, y⃗)`` with Eve's outcome summed out at setting ``z``."""
        return BoxTable(self.shape, self.by_entry()[:, z, :].sum(axis=1))

    def validate(self, tol=None) -> List[Violation]:
        tol = (0 if self.exact else FLOAT_TOL) if tol is None else tol
        out = []
        v = self.view()
        n = self.pairs
        # bring settings (x_i, y_i, z) to the front
        perm = [ax for i in range(n) for ax in (4 * i, 4 * i + 1)] + [4 * n]
        perm += [ax for i in range(n) for ax in (4 * i + 2, 4 * i + 3)] + [4 * n + 1]
        cols = (self.shape.outcomes_a * self.shape.outcomes_b) ** n * self.eve_outcomes
        rows = v.transpose(perm).reshape(-1, cols)
        if self.exact:
            lows = [min(row) for row in rows]
            devs = [abs(sum(row, Fraction(0)) - 1) for row in rows]
        else:
            lows = rows.min(axis=1)
            devs = np.abs(rows.sum(axis=1) - 1.0)
        for r, (lo, dev) in enumerate(zip(lows, devs)):
            if lo < -tol:
                out.append(Violation("negativity", (r,), -lo))
            if dev > tol:
                out.append(Violation("normalization", (r,), dev))
        return out

    @cached_property
    def diagnostics(self) -> List[Violation]:
        """Validity and no-signaling violations at default tolerance."""
        return self.validate() + self.nosignaling_check()

    def nosignaling_check(self, tol=None) -> List[Violation]:
        """(N+2)-partite no-signaling: Eve, Bob's systems as one party, each of Alice's systems."""
        tol = (0 if self.exact else FLOAT_TOL) if tol is None else tol
        v = self.view()
        n = self.pairs
        z_ax, e_ax = 4 * n, 4 * n + 1
        out = []
        marg = v.sum(axis=e_ax)
        worst = _max_abs(marg - np.take(marg, [0], axis=z_ax))
        if worst > tol:
            out.append(Violation("signaling", ("eve_setting",), worst))
        b_axes = tuple(4 * i + 3 for i in range(n))
        marg = v.sum(axis=b_axes)
        # after removing b axes, y_i sits at 3*i + 1
        ref = marg
        for i in range(n):
            ref = np.take(ref, [0], axis=3 * i + 1)
        worst = _max_abs(marg - ref)
        if worst > tol:
            out.append(Violation("signaling", ("bob_setting",), worst))
        for i in range(n):
            marg = v.sum(axis=4 * i + 2)
            worst = _max_abs(marg - np.take(marg, [0], axis=4 * i))
            if worst > tol:
                out.append(Violation("signaling", ("alice_setting", i), worst))
        return out

    def key_marginals(self) -> np.ndarray:
        """``P(a⃗, e | x⃗ = 0, y⃗ = 0, z)`` as a ``(2^N, Z, E)`` array."""
        n = self.pairs
        v = self.view()
        idx = []
        for _ in range(n):
            idx += [0, 0, slice(None), slice(None)]
        sub = v[tuple(idx)]
        sub = sub.sum(axis=tuple(range(1, 2 * n, 2)))
        return sub.reshape(-1, self.eve_settings, self.eve_outcomes)


def _require_nonsignaling(joint: JointDistribution):
    diags = joint.diagnostics
    if diags:
        raise SignalingError("joint distribution is not a valid (N+2)-partite nonsignaling distribution", diags)


def _group_outputs(pa: np.ndarray, h: HashFunction) -> np.ndarray:
    """Sum the leading raw-key axis into hash outputs."""
    onehot = np.zeros((2**h.n_out, pa.shape[0]), dtype=np.int64)
    onehot[h.table, np.arange(pa.shape[0])] = 1
    if pa.dtype == object:
        onehot = onehot.astype(object)
    return np.tensordot(onehot, pa, axes=([1], [0]))


def _frac_or_float(exact: bool, num: int, den: int):
    return Fraction(num, den) if exact else num / den


def distinguish_from_marginals(pa: np.ndarray, h: HashFunction, concatenated: bool = False):
    """``Σ_{k,c} max_z Σ_e |P(k,c,e|z) − 2^-n_s P(c,e|z)|`` from ``P(a⃗, e | z)``.

    ``pa`` has shape ``(2^N, Z, E)``. With ``concatenated`` the whole output
    is treated as key (reference ``2^-(n_s+n_c) P(e|z)``).
    """
    exact = pa.dtype == object
    out = _group_outputs(pa, h)
    if concatenated or h.n_c == 0:
        ref = out.sum(axis=0, keepdims=True) * _frac_or_float(exact, 1, 2**h.n_out)
        diff = np.abs(out - ref)
    else:
        out = out.reshape((2**h.n_c, 2**h.n_s) + out.shape[1:])
        ref = out.sum(axis=1, keepdims=True) * _frac_or_float(exact, 1, 2**h.n_s)
        diff = np.abs(out - ref).reshape((2**h.n_out,) + out.shape[2:])
    per_z = diff.sum(axis=2)  # (outputs, Z)
    best = per_z.max(axis=1)
    total = sum(best, Fraction(0)) if exact else float(best.sum())
    return total


def distinguish_lhs(joint: JointDistribution, h: HashFunction, concatenated: bool = False):
    """Distinguishing quantity ``D`` and the optimal guessing probability ``1/2 + D/4``."""
    if h.n_r != joint.pairs:
        raise InputError(f"hash takes {h.n_r} bits but the joint has {joint.pairs} pairs")
    if not joint.shape.is_binary:
        raise InputError("key extraction needs binary outcomes and settings")
    _require_nonsignaling(joint)
    D = distinguish_from_marginals(joint.key_marginals(), h, concatenated)
    return D, Fraction(1, 2) + D / 4 if is_exact(D) else 0.5 + D / 4


def main_bound_rhs(n_s: int, n_r: int, value):
    """``√2^(n_s + √n_r) · value``."""
    value = parse_scalar(value)
    if value <= 0:
        raise InputError("the functional value must be positive")
    return sqrt2_pow(n_s + sqrt_count(n_r)) * value


def comm_bound_rhs(n_s: int, n_c: int, n_r: int, value):
    """``2 · √2^(n_c + n_s + √n_r) · value``."""
    value = parse_scalar(value)
    if value <= 0:
        raise InputError("the functional value must be positive")
    return 2 * sqrt2_pow(n_c + n_s + sqrt_count(n_r)) * value


def smooth_bound(bound, epsilon):
    """Bound for an ε-close distribution: ``bound + 2ε``."""
    epsilon = parse_scalar(epsilon)
    if epsilon < 0:
        raise InputError("epsilon must be nonnegative")
    return bound + 2 * epsilon


@dataclass(frozen=True)
class KeyRate:
    n_s: int
    real: object
    kind: str
    proven: bool
    asymptotic: bool = True

    def to_dict(self) -> dict:
        return {
            "n_s": self.n_s,
            "real": float(self.real),
            "functional": self.kind,
            "proven": self.proven,
            "asymptotic": self.asymptotic,
        }


def key_rate(value, n_r: int, n_c: int = 0, kind: str = "chsh") -> KeyRate:
    """Leading-order key length ``log2(value^-2n_r) − n_c``, floored at zero.

    ``value`` is the per-pair functional value. Exact powers of √2 give an
    exact result; otherwise the real part is computed in floating point.
    """
    value = parse_scalar(value)
    if value <= 0:
        raise InputError("the functional value must be positive")
    lg = log2_exact(value)
    if lg is not None:
        real = -2 * n_r * lg - n_c
        n_s = max(0, math.floor(real))
    else:
        real = -2.0 * n_r * math.log2(float(value)) - n_c
        n_s = max(0, math.floor(real + FLOAT_TOL * max(1.0, abs(real))))
    return KeyRate(n_s, real, kind, kind != "bc-mod")


@dataclass(frozen=True)
class SecurityReport:
    lhs_D: object
    p_correct: object
    rhs_bound: object
    value: object
    passed: bool

    def to_dict(self) -> dict:
        return {
            "lhs_D": to_json(self.lhs_D),
            "p_correct": to_json(self.p_correct),
            "rhs_bound": to_json(self.rhs_bound),
            "chsh_value": to_json(self.value),
            "pass": self.passed,
        }


def leq(lhs, rhs, tol: float = FLOAT_TOL) -> bool:
    """``lhs <= rhs``; exact when both sides are exact, else with a relative slack."""
    if is_exact(lhs) and is_exact(rhs):
        return lhs <= rhs
    lf, rf = float(lhs), float(rhs)
    return lf <= rf + tol * max(1.0, abs(rf))


def security_report(joint: JointDistribution, h: HashFunction, epsilon=0) -> SecurityReport:
    """Distinguishing quantity against the main (n_c = 0) or communication bound."""
    D, p = distinguish_lhs(joint, h)
    value = evaluate(chsh(), joint.average_box())
    if h.n_c == 0:
        rhs = main_bound_rhs(h.n_s, h.n_r, value)
    else:
        rhs = comm_bound_rhs(h.n_s, h.n_c, h.n_r, value)
    if parse_scalar(epsilon) != 0:
        rhs = smooth_bound(rhs, epsilon)
    return SecurityReport(D, p, rhs, value, leq(D, rhs))
