"""Brute-force primal and dual values on tiny finite instances.

The primal side maximises over measures nu on the support

    sum_j nu_j u_j - d_c(mu0, nu)^2 / (2 eta2)

through couplings: for a transport budget t the best linear gain h(t) is a
small linear programme, h is concave in t, and the primal value is
max_t h(t) - t^2 / (2 eta2). The dual side is the one-dimensional convex
problem in the multiplier. The two sides share no code, so their gap
certifies the duality used by the main solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .golden import golden_section

MAX_SUPPORT = 4
MAX_DIM = 2
MASS_TOL = 1e-12
SEARCH_TOL = 1e-10


class OracleError(ValueError):
    """Raised for malformed tiny instances or transport inputs."""


@dataclass(frozen=True)
class TinyInstance:
    support: np.ndarray
    u_values: np.ndarray
    mu0: np.ndarray
    eta2: float
    p: float = 2.0

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        u_values = np.asarray(self.u_values, dtype=float).reshape(-1)
        mu0 = np.asarray(self.mu0, dtype=float).reshape(-1)
        k, m = support.shape
        if not 1 <= k <= MAX_SUPPORT or not 1 <= m <= MAX_DIM:
            raise OracleError(f"Tiny instances have at most {MAX_SUPPORT} points in dimension <= {MAX_DIM}")
        if u_values.shape[0] != k or mu0.shape[0] != k:
            raise OracleError("support, u_values and mu0 must have the same length")
        _check_masses(mu0, "mu0")
        if len({tuple(row) for row in support}) != k:
            raise OracleError("Support points must be distinct")
        if self.eta2 <= 0 or self.p < 1:
            raise OracleError(f"Need eta2 > 0 and p >= 1, got eta2={self.eta2}, p={self.p}")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "u_values", u_values)
        object.__setattr__(self, "mu0", mu0)

    @property
    def cost_matrix(self) -> np.ndarray:
        diff = self.support[:, None, :] - self.support[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=2)) ** self.p


def _check_masses(masses: np.ndarray, name: str) -> None:
    if np.any(masses < 0) or not np.all(np.isfinite(masses)):
        raise OracleError(f"{name} must be finite and nonnegative")
    if abs(float(masses.sum()) - 1.0) > MASS_TOL:
        raise OracleError(f"{name} sums to {masses.sum()!r}, expected 1")


def _monotone_cost(points: np.ndarray, mu: np.ndarray, nu: np.ndarray, p: float) -> float:
    """North-west corner rule on sorted 1-D supports, optimal for convex costs."""
    order = np.argsort(points)
    xs = points[order]
    a = mu[order].copy()
    b = nu[order].copy()
    i = j = 0
    total = 0.0
    while i < len(xs) and j < len(xs):
        moved = min(a[i], b[j])
        total += moved * abs(xs[i] - xs[j]) ** p
        a[i] -= moved
        b[j] -= moved
        if a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return total


def transport_cost(
    mu: np.ndarray,
    mu_prime: np.ndarray,
    cost_matrix: np.ndarray,
    points_1d: np.ndarray | None = None,
    p: float | None = None,
) -> float:
    """Optimal transport cost between two measures on the same finite support.

    With ``points_1d`` and ``p`` given the monotone coupling is used;
    otherwise the transportation LP is solved exactly.

    Raises:
        OracleError: If either measure is invalid or the total masses differ.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    mu_prime = np.asarray(mu_prime, dtype=float).reshape(-1)
    cost = np.asarray(cost_matrix, dtype=float)
    k = mu.shape[0]
    if mu_prime.shape[0] != k or cost.shape != (k, k):
        raise OracleError("Measures and cost matrix sizes do not match")
    if np.any(mu < 0) or np.any(mu_prime < 0):
        raise OracleError("Masses must be nonnegative")
    if abs(float(mu.sum()) - float(mu_prime.sum())) > MASS_TOL:
        raise OracleError(f"Mass mismatch: {mu.sum()!r} vs {mu_prime.sum()!r}")
    if points_1d is not None and p is not None:
        return _monotone_cost(np.asarray(points_1d, dtype=float).reshape(-1), mu, mu_prime, p)

    a_eq, b_eq = _marginal_constraints(mu, mu_prime)
    res = linprog(cost.reshape(-1), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise OracleError(f"Transportation LP failed: {res.message}")
    return max(float(res.fun), 0.0)


def _marginal_constraints(
    mu: np.ndarray, mu_prime: np.ndarray | None
) -> tuple[np.ndarray, np.ndarray]:
    k = mu.shape[0]
    rows = np.kron(np.eye(k), np.ones((1, k)))
    if mu_prime is None:
        return rows, mu
    cols = np.kron(np.ones((1, k)), np.eye(k))
    # The last column constraint is implied by the others.
    return np.vstack([rows, cols[:-1]]), np.concatenate([mu, mu_prime[:-1]])


def _best_gain(instance: TinyInstance, budget: float) -> float:
    """max of sum_ij pi_ij u_j over couplings with first marginal mu0 and cost <= budget."""
    k = instance.mu0.shape[0]
    gain = np.tile(instance.u_values, k)
    a_eq, b_eq = _marginal_constraints(instance.mu0, None)
    res = linprog(
        -gain,
        A_ub=instance.cost_matrix.reshape(1, -1),
        b_ub=[budget],
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        raise OracleError(f"Budgeted transport LP failed: {res.message}")
    return -float(res.fun)


def primal_value(instance: TinyInstance) -> float:
    """sup over measures of expected utility minus the squared transport penalty."""
    cost = instance.cost_matrix
    # Moving everything to a single point never costs more than the largest entry.
    t_max = float(cost.max())
    if t_max == 0.0:
        return float(instance.mu0 @ instance.u_values)

    def objective(t: float) -> float:
        return -(_best_gain(instance, t) - t * t / (2.0 * instance.eta2))

    result = golden_section(objective, 0.0, t_max, tol=SEARCH_TOL * max(1.0, t_max))
    return -result.minimum


def dual_bracket(instance: TinyInstance) -> float:
    return (2.0 / math.sqrt(instance.eta2)) * (1.0 + float(np.max(np.abs(instance.u_values))))


def dual_value(instance: TinyInstance) -> float:
    """min over a >= 0 of eta2 a^2 / 2 + sum_i mu0_i max_j (u_j - a c_ij)."""
    cost = instance.cost_matrix
    u = instance.u_values

    def g(a: float) -> float:
        return 0.5 * instance.eta2 * a * a + float(instance.mu0 @ (u[None, :] - a * cost).max(axis=1))

    result = golden_section(g, 0.0, dual_bracket(instance), tol=SEARCH_TOL)
    return result.minimum


def duality_gap(instance: TinyInstance) -> float:
    return abs(primal_value(instance) - dual_value(instance))


def random_instance(rng: np.random.Generator, k: int = 3, m: int = 1, eta2: float | None = None) -> TinyInstance:
    """Random tiny instance with support in [-1, 1]^m and utilities in [0, 1]."""
    support = rng.uniform(-1.0, 1.0, size=(k, m))
    mu0 = rng.dirichlet(np.ones(k))
    mu0 = mu0 / mu0.sum()
    if eta2 is None:
        eta2 = float(10.0 ** rng.uniform(-2.0, 2.0))
    return TinyInstance(support=support, u_values=rng.uniform(0.0, 1.0, size=k), mu0=mu0, eta2=eta2)
