"""Golden-section search for one-dimensional convex minimisation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GoldenResult:
    argmin: float
    minimum: float
    iterations: int
    converged: bool


def golden_section(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> GoldenResult:
    """Minimise a unimodal ``f`` on ``[lo, hi]``.

    The bracket is shrunk until its width is below ``tol``. Both endpoints are
    evaluated as well, so minimisers sitting on the boundary (a common case for
    the dual variable at zero) are returned exactly.

    Raises:
        ValueError: If the bracket is empty or ``tol`` is not positive.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise ValueError(f"Invalid bracket [{lo}, {hi}]")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")

    f_lo = f(lo)
    f_hi = f(hi)
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1 = f(x1)
    f2 = f(x2)

    iterations = 0
    while b - a > tol and iterations < max_iter:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        iterations += 1

    x_mid = 0.5 * (a + b)
    f_mid = f(x_mid)
    candidates = [(f_mid, x_mid), (f1, x1), (f2, x2), (f_lo, lo), (f_hi, hi)]
    best_f, best_x = min(candidates, key=lambda item: item[0])
    converged = b - a <= tol and math.isfinite(best_f)
    return GoldenResult(argmin=best_x, minimum=best_f, iterations=iterations, converged=converged)
