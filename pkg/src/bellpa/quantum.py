"""Singlet correlations measured on the equator, for chained-functional key rates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .bell import bc, evaluate
from .box import BoxShape, BoxTable
from .errors import InputError


@dataclass(frozen=True)
class MeasurementLayout:
    alice_angles: Tuple[float, ...]
    bob_angles: Tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.alice_angles)

    @classmethod
    def chained(cls, m: int) -> "MeasurementLayout":
        """Alice at ``xπ/m``, Bob half a step back at ``(y − 1/2)π/m``.

        Every chain link then sees an angle gap of ``π/(2m)``.
        """
        if m < 2:
            raise InputError(f"chained layout needs m >= 2, got {m}")
        return cls(
            tuple(x * math.pi / m for x in range(m)),
            tuple((y - 0.5) * math.pi / m for y in range(m)),
        )

    @classmethod
    def chsh(cls) -> "MeasurementLayout":
        """Settings that reach the Cirel'son value of the CHSH functional."""
        return cls((0.0, math.pi / 2), (math.pi / 4, -math.pi / 4))


def singlet_box(layout: MeasurementLayout) -> BoxTable:
    """``P(a, b | x, y) = (1 + (−1)^(a⊕b) cos(θA_x − θB_y)) / 4``.

    Bob's outcome is relabelled so that equal angles give equal bits.
    """
    sa, sb = len(layout.alice_angles), len(layout.bob_angles)
    if sa < 1 or sb < 1:
        raise InputError("layout needs at least one angle per side")
    shape = BoxShape(1, 2, 2, sa, sb)
    c = np.cos(np.subtract.outer(np.asarray(layout.alice_angles), np.asarray(layout.bob_angles)))
    sign = np.array([[1.0, -1.0], [-1.0, 1.0]])  # (−1)^(a⊕b)
    out = ((1 + c[:, :, None, None] * sign) / 4).reshape(-1)
    return BoxTable(shape, out)


def bc_value_quantum(m: int) -> float:
    """Chained functional of ``m`` settings on the singlet with the chained layout."""
    return float(evaluate(bc(m), singlet_box(MeasurementLayout.chained(m))))


def key_agreement(m: int) -> float:
    """``P(a = b | x = 0, y = 0)`` for the chained layout."""
    box = singlet_box(MeasurementLayout.chained(m))
    return float(box.entry(0, 0, 0, 0) + box.entry(1, 1, 0, 0))


def bhk_rate(m: int, n_c: float = 0, n_r: int = 1) -> float:
    """Leading-order secret bits per pair, ``−2 log2(value) − n_c / n_r``."""
    if n_r < 1:
        raise InputError("n_r must be positive")
    return -2.0 * math.log2(bc_value_quantum(m)) - n_c / n_r


def bhk_sweep(ms: Sequence[int], n_c: float = 0, n_r: int = 1) -> List[dict]:
    rows = []
    for m in ms:
        v = bc_value_quantum(m)
        rows.append({"m": m, "bc_value": v, "rate": -2.0 * math.log2(v) - n_c / n_r})
    return rows
