"""The dual-variable transform iota(alpha) = log cosh(alpha) and its constants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect

LOG2 = math.log(2.0)

SCAN_HALF_WIDTH = 20.0
SCAN_STEP = 1e-4
SAFETY_MARGIN = 1.1


class PenaltyError(ValueError):
    """Raised for non-finite or out-of-range penalty arguments."""


def _finite(alpha: float | np.ndarray) -> np.ndarray:
    arr = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise PenaltyError(f"iota needs finite arguments, got {alpha!r}")
    return arr


def _out(value: np.ndarray, like: float | np.ndarray) -> float | np.ndarray:
    return float(value) if np.ndim(like) == 0 else value


def iota(alpha: float | np.ndarray) -> float | np.ndarray:
    """log cosh(alpha), evaluated as |a| + log(1 + e^{-2|a|}) - log 2."""
    a = np.abs(_finite(alpha))
    value = np.maximum(a + np.log1p(np.exp(-2.0 * a)) - LOG2, 0.0)
    return _out(value, alpha)


def iota_prime(alpha: float | np.ndarray) -> float | np.ndarray:
    return _out(np.tanh(_finite(alpha)), alpha)


def iota_second(alpha: float | np.ndarray) -> float | np.ndarray:
    """sech^2(alpha) written with e^{-2|a|} so it never overflows."""
    e = np.exp(-2.0 * np.abs(_finite(alpha)))
    return _out(4.0 * e / (1.0 + e) ** 2, alpha)


def iota_inverse(c: float) -> float:
    """The nonnegative root of iota(alpha) = c."""
    if not math.isfinite(c) or c < 0:
        raise PenaltyError(f"iota takes values in [0, inf), cannot invert {c!r}")
    if c == 0:
        return 0.0
    # iota(a) >= a - log 2, so the root lies below c + log 2.
    return float(bisect(lambda a: iota(a) - c, 0.0, c + LOG2 + 1.0, xtol=1e-14, maxiter=500))


@dataclass(frozen=True)
class PenaltyConstants:
    a_iota: float
    b_iota: float
    L_iota: float
    M_iota: float
    Ltilde_iota: float


def scan_grid() -> np.ndarray:
    count = int(round(2 * SCAN_HALF_WIDTH / SCAN_STEP)) + 1
    return np.linspace(-SCAN_HALF_WIDTH, SCAN_HALF_WIDTH, count)


@lru_cache(maxsize=1)
def dissipativity_constants() -> PenaltyConstants:
    """Constants of the transform, with b_iota and Ltilde_iota from a dense scan.

    b_iota is the supremum of a^2/2 - a iota(a) iota'(a) over [-20, 20] (the
    expression tends to -inf outside), and Ltilde_iota the supremum of
    |d(iota iota')/da| = |iota'^2 + iota iota''|; both carry a 10% margin.
    """
    alpha = scan_grid()
    i0 = iota(alpha)
    i1 = iota_prime(alpha)
    i2 = iota_second(alpha)
    b_scan = float(np.max(0.5 * alpha**2 - alpha * i0 * i1))
    lip_scan = float(np.max(np.abs(i1**2 + i0 * i2)))
    return PenaltyConstants(
        a_iota=0.5,
        b_iota=SAFETY_MARGIN * b_scan,
        L_iota=1.0,
        M_iota=1.0,
        Ltilde_iota=SAFETY_MARGIN * lip_scan,
    )
