"""Seeded hash tables, preimage aggregates and the entry-wise hashing lemma.

A hash maps ``n_r`` raw-key bits to ``n_c + n_s`` output bits; table entry
``a`` packs the output as ``(c << n_s) | k``. Raw-key strings are integers
with pair 1 as the most significant bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from .bell import chsh_weight_vector
from .box import BoxShape, unflat_index
from .errors import InputError
from .gamma import Variant, gamma_matrix, gamma_tensor_entry
from .scalar import QSqrt2, isqrt_exact, sqrt2_pow

MAX_TABLE_BITS = 24
MAX_SCAN_BITS = 6
REL_TOL = 1e-9

_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def mix64(seed: int, a: int) -> int:
    """Bit-exact 64-bit mixer (splitmix64 finaliser over ``seed + (a+1)·φ``)."""
    z = (seed + (a + 1) * _GOLDEN) & _MASK
    z ^= z >> 30
    z = (z * _M1) & _MASK
    z ^= z >> 27
    z = (z * _M2) & _MASK
    z ^= z >> 31
    return z


def _mix64_array(seed: int, a: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + (a.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN)
        z ^= z >> np.uint64(30)
        z *= np.uint64(_M1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_M2)
        z ^= z >> np.uint64(31)
    return z


@dataclass(frozen=True, eq=False)
class HashFunction:
    n_r: int
    n_s: int
    n_c: int
    table: np.ndarray

    def __post_init__(self):
        if min(self.n_r, self.n_s, self.n_c) < 0:
            raise InputError("bit counts must be nonnegative")
        t = np.asarray(self.table, dtype=np.int64).ravel()
        if t.size != 2**self.n_r:
            raise InputError(f"table needs {2 ** self.n_r} entries, got {t.size}")
        if t.size and (t.min() < 0 or t.max() >= 2 ** self.n_out):
            raise InputError(f"table entries must lie in [0, 2^{self.n_out})")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def n_out(self) -> int:
        return self.n_s + self.n_c

    def key(self, a: int) -> int:
        return int(self.table[a]) & ((1 << self.n_s) - 1)

    def comm(self, a: int) -> int:
        return int(self.table[a]) >> self.n_s

    @cached_property
    def keys(self) -> np.ndarray:
        return self.table & ((1 << self.n_s) - 1)

    @cached_property
    def comms(self) -> np.ndarray:
        return self.table >> self.n_s

    def to_dict(self) -> dict:
        return {"nr": self.n_r, "ns": self.n_s, "nc": self.n_c, "table": [int(v) for v in self.table]}

    @classmethod
    def from_dict(cls, d: dict) -> "HashFunction":
        try:
            return cls(int(d["nr"]), int(d["ns"]), int(d.get("nc", 0)), np.array(d["table"], dtype=np.int64))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed hash description: {exc}") from exc


def hash_from_seed(n_r: int, n_s: int, n_c: int = 0, seed: int = 0) -> HashFunction:
    """Pseudorandom table: ``table[a]`` is the low ``n_s + n_c`` bits of ``mix64(seed, a)``."""
    if n_r > MAX_TABLE_BITS:
        raise InputError(f"n_r = {n_r} exceeds the table-size guard of {MAX_TABLE_BITS}")
    if not 0 <= seed < 2**64:
        raise InputError("seed must be a 64-bit unsigned integer")
    width = n_s + n_c
    z = _mix64_array(seed, np.arange(2**n_r, dtype=np.uint64))
    mask = np.uint64((1 << width) - 1) if width < 64 else np.uint64(_MASK)
    table = (z & mask).astype(np.int64) if width < 63 else (z & mask)
    return HashFunction(n_r, n_s, n_c, table)


def identity_hash(n_r: int) -> HashFunction:
    return HashFunction(n_r, n_r, 0, np.arange(2**n_r))


def constant_hash(n_r: int, n_s: int = 1, value: int = 0) -> HashFunction:
    return HashFunction(n_r, n_s, 0, np.full(2**n_r, value))


def preimage(h: HashFunction, k: int, c: Optional[int] = None) -> Tuple[int, ...]:
    """Raw-key strings ``a`` with key part ``k`` (and public part ``c`` if given)."""
    if not 0 <= k < 2**h.n_s:
        raise InputError(f"key {k} out of range for n_s = {h.n_s}")
    mask = h.keys == k
    if c is not None:
        if not 0 <= c < 2**h.n_c:
            raise InputError(f"public value {c} out of range for n_c = {h.n_c}")
        mask &= h.comms == c
    return tuple(int(a) for a in np.flatnonzero(mask))


def _bits(a: int, n: int) -> Tuple[int, ...]:
    return tuple((a >> (n - 1 - i)) & 1 for i in range(n))


def gamma_Ak_entry(h: HashFunction, k: int, index, c: Optional[int] = None) -> Fraction:
    """``Σ_{a ∈ A_k} Γ_a`` at one entry, streamed over the preimage."""
    total = Fraction(0)
    for a in preimage(h, k, c):
        total += gamma_tensor_entry(_bits(a, h.n_r), index)
    return total


# -- entry-wise hashing bound ------------------------------------------------------

@dataclass(frozen=True)
class Lemma2Report:
    worst_ratio: object
    worst_index: tuple
    passed: bool
    exact: bool

    def to_dict(self) -> dict:
        from .scalar import describe

        out, (a, b, x, y) = self.worst_index
        return {
            "worst_ratio": describe(self.worst_ratio) if self.exact else float(self.worst_ratio),
            "worst_ratio_float": float(self.worst_ratio),
            "worst_index": {"output": out, "a": list(a), "b": list(b), "x": list(x), "y": list(y)},
            "exact": self.exact,
            "pass": self.passed,
        }


def _output_onehot(h: HashFunction) -> np.ndarray:
    v = np.zeros((2**h.n_out, 2**h.n_r), dtype=np.int64)
    v[h.table, np.arange(2**h.n_r)] = 1
    return v


def _contract_strings(vec: np.ndarray, G: np.ndarray, n: int) -> np.ndarray:
    """``Σ_a vec[a] ⊗_i G[a_i]`` as a flat ``16^n`` array."""
    t = vec.reshape((2,) * n)
    for _ in range(n):
        t = np.tensordot(t, G, axes=([0], [0]))
    return t.reshape(-1)


def _scan_chunks(n: int):
    """Split the ``16^n`` entries into (first-pair prefix, offset) chunks of <= 16^4 entries."""
    head = max(0, n - 4)
    for p in range(16**head):
        yield head, p


def lemma2_check(h: HashFunction, workers: Optional[int] = None) -> Lemma2Report:
    """Worst entry-wise ratio ``|2^n Γ_A − 4^-N| / (√2^(n+√N) CHSH^⊗N)``.

    ``n`` is the full output width ``n_s + n_c`` and ``A`` ranges over all
    output preimages. Everything is scaled by ``8^N`` so the left side is an
    integer; the comparison is exact when ``√N`` is an integer.
    """
    N = h.n_r
    if N < 1:
        raise InputError("n_r must be at least 1")
    if N > MAX_SCAN_BITS:
        raise InputError(f"n_r = {N} exceeds the entry-scan guard of {MAX_SCAN_BITS}")
    n_out = h.n_out
    root = isqrt_exact(N)
    exact = root is not None
    t = n_out + (root if exact else math.sqrt(N)) + N
    G, _ = gamma_matrix(Variant.PLAIN)
    onehot = _output_onehot(h)
    w_single = chsh_weight_vector(1)

    def scan(k):
        vec = onehot[k].reshape((2,) * N)
        best = (-1.0, 0)
        cands = []
        for head, p in _scan_chunks(N):
            tail = N - head
            # fix the leading ``head`` pairs at the entry digits of p
            digits = [(p // 16 ** (head - 1 - i)) % 16 for i in range(head)]
            part = vec
            for d in digits:
                part = np.tensordot(G[:, d], part, axes=([0], [0]))
            gam = _contract_strings(part, G, tail)
            m = chsh_weight_vector(tail) + int(sum(w_single[d] for d in digits))
            lhs = np.abs((2**n_out) * gam - 2**N)
            ratio = lhs / (np.power(5.0, m) * 2.0 ** (t / 2))
            j = int(np.argmax(ratio))
            offset = p * 16**tail
            if ratio[j] > best[0]:
                best = (float(ratio[j]), offset + j)
            if exact:
                cands.append((offset, lhs, m, ratio))
        return best, cands

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(scan, range(2**n_out)))
    else:
        results = [scan(k) for k in range(2**n_out)]

    top = max(r[0][0] for r in results)
    if not exact:
        k, (val, idx) = next((k, r[0]) for k, r in enumerate(results) if r[0][0] == top)
        shape = BoxShape(N)
        return Lemma2Report(val, (k, unflat_index(shape, idx)), val <= 1 + REL_TOL, False)

    # exact tie-break among near-maximal entries; equal (lhs, M) give equal ratios
    cache = {}
    best_val, best_at = None, None
    for k, (_, cands) in enumerate(results):
        for offset, lhs, m, ratio in cands:
            for j in np.flatnonzero(ratio >= top * (1 - 1e-12)):
                key = (int(lhs[j]), int(m[j]))
                if key not in cache:
                    cache[key] = Fraction(key[0], 5 ** key[1]) * sqrt2_pow(-int(t))
                val = cache[key]
                if best_val is None or val > best_val:
                    best_val, best_at = val, (k, offset + int(j))
    if best_val == 0:
        best_at = (0, 0)
    if not isinstance(best_val, QSqrt2):
        best_val = QSqrt2(best_val)
    shape = BoxShape(N)
    return Lemma2Report(best_val, (best_at[0], unflat_index(shape, best_at[1])), best_val <= 1, True)


# -- Bernstein construction ------------------------------------------------------

@dataclass(frozen=True)
class MuSums:
    sum_mu: Fraction
    sum_mu_sq: Fraction
    max_abs_mu: Fraction
    M: int


def mu_sums(a0, b0, x0, y0) -> MuSums:
    """Moments of ``μ_a = Γ_a(a0, b0, x0, y0)`` over every raw-key string ``a``."""
    n = len(a0)
    if n > MAX_SCAN_BITS:
        raise InputError(f"n_r = {n} exceeds the scan guard of {MAX_SCAN_BITS}")
    index = (tuple(a0), tuple(b0), tuple(x0), tuple(y0))
    mus = [gamma_tensor_entry(_bits(a, n), index) for a in range(2**n)]
    M = sum(p ^ q ^ (r & s) for p, q, r, s in zip(a0, b0, x0, y0))
    return MuSums(sum(mus, Fraction(0)), sum((m * m for m in mus), Fraction(0)), max(abs(m) for m in mus), M)


@dataclass(frozen=True)
class BernsteinQuantities:
    J: float
    beta: float
    tail: float
    constraint: float

    @property
    def constraint_ok(self) -> bool:
        return self.constraint <= 1 + REL_TOL


def bernstein_quantities(n_r: int, n_s: int, M: int) -> BernsteinQuantities:
    """Threshold ``J``, exponent ``β``, claimed tail and the constraint ``β·5^M·8^-N``."""
    r = math.sqrt(n_r)
    J = 2.0 ** (-n_s - 2 * n_r) + 2.0 ** ((r - n_r - n_s) / 2) * 4.0 ** (-n_r) * 5.0**M
    beta = 2.0 ** ((r + n_r + n_s) / 2) * 4.0**n_r * 5.0 ** (-M)
    tail = math.exp(-(2.0**r) / 4)
    constraint = abs(beta * 5.0**M * 8.0 ** (-n_r))
    return BernsteinQuantities(J, beta, tail, constraint)


def chernoff_exponent(n_r: int, n_s: int, M: int, beta: Optional[float] = None) -> float:
    """Log of the moment bound ``-βJ + 2^-n_s (β Σμ + β² Σμ²)``.

    Uses ``Σμ = 4^-N`` and the bound ``Σμ² ≤ 2^-5N 5^2M``. With the printed
    ``β`` the exponent is 0 (the bound is trivial); ``β/2`` gives
    ``-2^√N / 4``.
    """
    q = bernstein_quantities(n_r, n_s, M)
    b = q.beta if beta is None else beta
    sum_mu = 4.0 ** (-n_r)
    sum_mu_sq = 2.0 ** (-5 * n_r) * 25.0**M
    return -b * q.J + 2.0 ** (-n_s) * (b * sum_mu + b * b * sum_mu_sq)


@dataclass(frozen=True)
class FailureBound:
    log_value: float
    vacuous: bool
    union_absorbed: bool

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 700 else math.inf


def hash_failure_bound(n_r: int, n_s: int) -> FailureBound:
    """``2 exp(5 N − 2^√N / 4)``, the probability that a random hash fails the lemma.

    ``union_absorbed`` reports whether the union over ``2^n_s`` keys and
    ``16^N`` entries really fits under the ``5N`` term.
    """
    log_value = math.log(2) + 5 * n_r - 2.0 ** math.sqrt(n_r) / 4
    union = n_s * math.log(2) + n_r * math.log(16) <= 5 * n_r
    return FailureBound(log_value, log_value >= 0, union)


def failure_crossover(limit: int = 10_000) -> int:
    """Smallest ``n_r`` at which the failure bound drops below one."""
    for n in range(1, limit):
        if not hash_failure_bound(n, 0).vacuous:
            return n
    raise InputError("no crossover below limit")
