"""Integer-order Bessel functions of the first kind.

All orders needed by a propagator row are produced in one downward
recurrence pass (Miller's algorithm), normalized with the sum rule

    J_0(x) + 2 * sum_{k>=1} J_{2k}(x) = 1.

Negative orders and negative arguments follow from the parity relations
J_{-n}(x) = (-1)^n J_n(x) and J_n(-x) = (-1)^n J_n(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_RESCALE_AT = 1e250
# below this |x| the power series is used (the recurrence ratio 2k/x overflows)
_SERIES_BELOW = 1e-3


@dataclass(frozen=True)
class BesselRow:
    """J_n(x) for every order n in [order_min, order_max]."""

    order_min: int
    order_max: int
    values: np.ndarray
    x: float

    def __getitem__(self, n: int) -> float:
        if not self.order_min <= n <= self.order_max:
            raise IndexError(f"order {n} outside [{self.order_min}, {self.order_max}]")
        return float(self.values[n - self.order_min])

    @property
    def orders(self) -> np.ndarray:
        return np.arange(self.order_min, self.order_max + 1)


def miller_start(x: float) -> int:
    """Starting order for the downward recurrence at argument ``x``."""
    ax = abs(x)
    return int(math.ceil(ax)) + 20 + 10 * int(math.ceil(ax ** (1.0 / 3.0)))


def _series_orders(ax: float, n_max: int) -> np.ndarray:
    """J_0..J_{n_max} from the ascending series, accurate for ax < 1e-3."""
    out = np.zeros(n_max + 1)
    h2 = (0.5 * ax) ** 2
    lead = 1.0  # (x/2)^n / n!
    for n in range(n_max + 1):
        if n > 0:
            lead *= 0.5 * ax / n
        if lead == 0.0:
            break
        term, total = lead, lead
        for k in range(1, 5):
            term *= -h2 / (k * (n + k))
            total += term
        out[n] = total
    return out


def _nonnegative_orders(ax: float, n_max: int) -> np.ndarray:
    """J_0..J_{n_max} at ax > 0 by normalized downward recurrence."""
    start = max(miller_start(ax), n_max) + 1
    out = np.zeros(n_max + 1)
    two_over_x = 2.0 / ax
    j_next = 0.0  # J_{k+1}
    j_cur = 1e-300  # J_k, arbitrary seed
    norm = 0.0
    for k in range(start, 0, -1):
        j_prev = k * two_over_x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        # j_cur now holds J_{k-1}
        if abs(j_cur) > _RESCALE_AT:
            j_cur /= _RESCALE_AT
            j_next /= _RESCALE_AT
            out /= _RESCALE_AT
            norm /= _RESCALE_AT
        k_low = k - 1
        if k_low <= n_max:
            out[k_low] = j_cur
        if k_low > 0 and k_low % 2 == 0:
            norm += 2.0 * j_cur
    norm += j_cur
    return out / norm


def bessel_row(x: float, half_width: int) -> BesselRow:
    """J_n(x) for n = -half_width .. half_width in a single pass.

    Parameters
    ----------
    x : float
        Real, finite argument.
    half_width : int
        Largest order magnitude returned; must be at least 1.
    """
    if half_width < 1:
        raise ValueError("half_width must be >= 1")
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"Bessel argument must be finite, got {x!r}")
    if x == 0.0:
        pos = np.zeros(half_width + 1)
        pos[0] = 1.0
    else:
        ax = abs(x)
        pos = _series_orders(ax, half_width) if ax < _SERIES_BELOW else _nonnegative_orders(ax, half_width)
        if x < 0:
            pos[1::2] = -pos[1::2]
    neg = pos[:0:-1].copy()
    # J_{-n} = (-1)^n J_n; neg is ordered -half_width .. -1
    orders_neg = np.arange(half_width, 0, -1)
    neg[orders_neg % 2 == 1] *= -1.0
    values = np.concatenate([neg, pos])
    return BesselRow(-half_width, half_width, values, x)


def bessel_j(n: int, x: float) -> float:
    """J_n(x) for integer ``n`` and finite real ``x``.

    Absolute error is at the 1e-13 level for |x| <= 1e3.
    """
    n = int(n)
    row = bessel_row(x, max(abs(n), 1))
    return row[n]
