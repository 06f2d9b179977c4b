"""Exact arithmetic in Q[sqrt 2] with a binary64 fallback.

Every coefficient that appears in the Bell functionals and the dual vectors
is of the form ``q`` or ``q * sqrt(2)`` with ``q`` rational, so
:class:`QSqrt2` is closed under everything the identity checks need.
Mixing a :class:`QSqrt2` with a ``float`` degrades to ``float``.
"""

from __future__ import annotations

import ast
import math
import numbers
from fractions import Fraction
from typing import Union

from .errors import InputError

Rational = Union[int, Fraction]
Scalar = Union[int, Fraction, "QSqrt2", float]

_SQRT2_F = math.sqrt(2.0)


def _sign_of(u: Fraction, v: Fraction) -> int:
    """Sign of u + v*sqrt(2) without leaving the rationals."""
    su = (u > 0) - (u < 0)
    sv = (v > 0) - (v < 0)
    if su == sv or sv == 0:
        return su
    if su == 0:
        return sv
    # opposite signs: compare u^2 against 2 v^2
    d = u * u - 2 * v * v
    return su if d > 0 else (sv if d < 0 else 0)


class QSqrt2:
    """An element ``u + v*sqrt(2)`` of Q[sqrt 2]."""

    __slots__ = ("u", "v")

    def __init__(self, u: Rational = 0, v: Rational = 0):
        self.u = Fraction(u)
        self.v = Fraction(v)

    # -- coercion -----------------------------------------------------
    @staticmethod
    def _coerce(other):
        if isinstance(other, QSqrt2):
            return other
        if isinstance(other, (int, Fraction)):
            return QSqrt2(other, 0)
        if isinstance(other, numbers.Integral):
            return QSqrt2(int(other), 0)
        return None

    @property
    def is_rational(self) -> bool:
        return self.v == 0

    def __float__(self) -> float:
        return float(self.u) + float(self.v) * _SQRT2_F

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            if isinstance(other, float):
                return float(self) + other
            return NotImplemented
        return QSqrt2(self.u + o.u, self.v + o.v)

    __radd__ = __add__

    def __neg__(self):
        return QSqrt2(-self.u, -self.v)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            if isinstance(other, float):
                return float(self) - other
            return NotImplemented
        return QSqrt2(self.u - o.u, self.v - o.v)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            if isinstance(other, float):
                return float(self) * other
            return NotImplemented
        return QSqrt2(self.u * o.u + 2 * self.v * o.v, self.u * o.v + self.v * o.u)

    __rmul__ = __mul__

    def inverse(self) -> "QSqrt2":
        norm = self.u * self.u - 2 * self.v * self.v
        if norm == 0:
            raise ZeroDivisionError("QSqrt2 division by zero")
        return QSqrt2(self.u / norm, -self.v / norm)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            if isinstance(other, float):
                return float(self) / other
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            if isinstance(other, float):
                return other / float(self)
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k):
        if not isinstance(k, int):
            return float(self) ** k
        if k < 0:
            return self.inverse() ** (-k)
        result, base = QSqrt2(1), self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def sign(self) -> int:
        return _sign_of(self.u, self.v)

    # -- comparison ---------------------------------------------------
    def _cmp(self, other):
        o = self._coerce(other)
        if o is None:
            if isinstance(other, float):
                f = float(self)
                return (f > other) - (f < other)
            return None
        return _sign_of(self.u - o.u, self.v - o.v)

    def __eq__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c == 0

    def __lt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c >= 0

    def __hash__(self):
        if self.v == 0:
            return hash(self.u)
        return hash((self.u, self.v))

    def __bool__(self):
        return bool(self.u) or bool(self.v)

    def __repr__(self):
        return f"QSqrt2({self.u}, {self.v})"

    def __str__(self):
        return format_exact(self)


SQRT2 = QSqrt2(0, 1)
INV_SQRT2 = QSqrt2(0, Fraction(1, 2))


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, QSqrt2))


def sqrt2_pow(k) -> Scalar:
    """``sqrt(2) ** k``; exact for integer ``k``, float otherwise."""
    if isinstance(k, Fraction) and k.denominator == 1:
        k = int(k)
    if isinstance(k, float) and k.is_integer():
        k = int(k)
    if isinstance(k, int):
        half, odd = divmod(k, 2)
        base = Fraction(2) ** half
        return QSqrt2(0, base) if odd else QSqrt2(base, 0)
    return 2.0 ** (float(k) / 2.0)


def isqrt_exact(n: int):
    """Integer square root of ``n`` when ``n`` is a perfect square, else None."""
    r = math.isqrt(n)
    return r if r * r == n else None


def sqrt_count(n: int) -> Union[int, float]:
    """``sqrt(n)`` as an int when exact; used for the sqrt(N_r) exponents."""
    r = isqrt_exact(n)
    return r if r is not None else math.sqrt(n)


def to_float(x) -> float:
    return float(x)


def simplify(x):
    """Collapse a rational QSqrt2 to a Fraction; leave everything else."""
    if isinstance(x, QSqrt2) and x.v == 0:
        return x.u
    return x


def log2_exact(x):
    """Exact ``log2(x)`` as a Fraction when ``x`` is a power of sqrt(2)."""
    if not is_exact(x):
        return None
    q = QSqrt2._coerce(x)
    if q.sign() <= 0:
        return None
    if q.v == 0:
        sq = q.u * q.u
    elif q.u == 0:
        sq = 2 * q.v * q.v
    else:
        return None
    num, den = sq.numerator, sq.denominator
    if num & (num - 1) or den & (den - 1):
        return None
    # x^2 = 2^j  =>  log2 x = j/2
    j = num.bit_length() - den.bit_length()
    return Fraction(j, 2)


def format_exact(x) -> str:
    """Human-readable form of an exact scalar, e.g. ``1/√2`` or ``3/4 + √2``."""
    if isinstance(x, float):
        return repr(x)
    q = QSqrt2._coerce(x)
    if q.v == 0:
        return str(q.u)
    if q.v.numerator == 1 and q.v.denominator % 2 == 0:
        k = q.v.denominator // 2
        rad = "1/√2" if k == 1 else f"1/({k}√2)"
    elif q.v.numerator == -1 and q.v.denominator % 2 == 0:
        k = q.v.denominator // 2
        rad = "-1/√2" if k == 1 else f"-1/({k}√2)"
    elif q.v == 1:
        rad = "√2"
    elif q.v == -1:
        rad = "-√2"
    elif q.v.denominator == 1:
        rad = f"{q.v.numerator}√2"
    else:
        rad = f"{q.v.numerator}√2/{q.v.denominator}"
    if q.u == 0:
        return rad
    if rad.startswith("-"):
        return f"{q.u} - {rad[1:]}"
    return f"{q.u} + {rad}"


def describe(x) -> str:
    """``exact ≈ float`` for exact scalars, plain repr for floats."""
    if isinstance(x, float):
        return f"{x:.8f}"
    return f"{format_exact(x)} ≈ {float(x):.8f}"


def to_json(x):
    """JSON value for a scalar: ``describe`` text when exact, a number otherwise."""
    if is_exact(x):
        return describe(x)
    return float(x)


# -- parsing ---------------------------------------------------------

_ALLOWED_BIN = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: _div(a, b),
}


def _div(a, b):
    if isinstance(a, int) and isinstance(b, int):
        return Fraction(a, b)
    return a / b


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name) and node.id == "sqrt2":
        return SQRT2
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "sqrt":
        if len(node.args) == 1:
            arg = _eval_node(node.args[0])
            if arg == 2:
                return SQRT2
            if isinstance(arg, (int, Fraction)) and arg >= 0:
                r = Fraction(arg)
                rn, rd = isqrt_exact(r.numerator), isqrt_exact(r.denominator)
                if rn is not None and rd is not None:
                    return Fraction(rn, rd)
            return math.sqrt(float(arg))
    if isinstance(node, ast.BinOp) and type(node.op) in _ALLOWED_BIN:
        return _ALLOWED_BIN[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
        base, exp = _eval_node(node.left), _eval_node(node.right)
        if isinstance(exp, int):
            return base ** exp
        return float(base) ** float(exp)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval_node(node.operand)
        return -val if isinstance(node.op, ast.USub) else val
    raise ValueError("unsupported expression")


def parse_scalar(text) -> Scalar:
    """Parse ``"3/4"``, ``"0.25"``, ``"1/sqrt(2)"``, ``"3/√2 - 1"`` and friends.

    Integer and ``p/q`` literals stay exact; any float literal makes the
    result a float.
    """
    if isinstance(text, (int, float, Fraction, QSqrt2)):
        return text
    s = str(text).strip().replace("√2", "sqrt2").replace("√(2)", "sqrt2").replace("^", "**")
    try:
        val = _eval_node(ast.parse(s, mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise InputError(f"cannot parse scalar {text!r}") from exc
    if isinstance(val, int):
        return Fraction(val)
    return simplify(val)
