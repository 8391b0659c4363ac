"""Smoothed discretised dual objective of the penalised DRO problem.

For theta_bar = (theta, alpha) and a data point x, every grid point xi_j
gets the score

    s_j = U(theta, xi_j) - iota(alpha) |x - xi_j|^p

and the hard maximum over j is replaced by the log-mean-exp at temperature
delta. All exponentials are max-shifted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from .golden import golden_section
from .grid import DEFAULT_MAX_POINTS, DiscreteMeasure, GridSpec, discretise_measure, enumerate_points
from .model import UtilityModel
from .penalty import iota, iota_prime

# Cap on the number of (atom, grid point) pairs held in memory at once.
CHUNK_ELEMENTS = 1_000_000

DUAL_TOL = 1e-8


class ProblemStateError(RuntimeError):
    """Raised when an operation needs state the problem was built without."""


@dataclass(frozen=True)
class ThetaBar:
    """The extended variable (theta, alpha) that robust SGLD runs on."""

    theta: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        alpha = float(self.alpha)
        if not (np.all(np.isfinite(theta)) and math.isfinite(alpha)):
            raise ValueError(f"ThetaBar components must be finite: theta={theta}, alpha={alpha}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def from_vector(cls, vector: np.ndarray | Sequence[float]) -> "ThetaBar":
        vector = np.asarray(vector, dtype=float).reshape(-1)
        if vector.shape[0] < 2:
            raise ValueError(f"ThetaBar needs at least 2 components, got {vector.shape[0]}")
        return cls(theta=vector[:-1].copy(), alpha=float(vector[-1]))

    def as_vector(self) -> np.ndarray:
        return np.append(self.theta, self.alpha)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_vector()))


@dataclass
class DROProblem:
    """Data of the discretised, smoothed dual problem.

    ``mu_disc`` may be omitted for problems that are only used pointwise
    (scores, gradients); the integrated objectives then raise
    ProblemStateError.
    """

    eta1: float
    eta2: float
    p: float
    delta: float
    grid: GridSpec
    utility: UtilityModel
    xi_points: np.ndarray
    mu_disc: DiscreteMeasure | None = None

    def __post_init__(self) -> None:
        if self.eta1 <= 0 or self.eta2 <= 0 or self.delta <= 0:
            raise ValueError(
                f"eta1, eta2 and delta must be positive (got {self.eta1}, {self.eta2}, {self.delta})"
            )
        if self.p < 1:
            raise ValueError(f"p must be at least 1, got {self.p}")
        if self.utility.m != self.grid.m:
            raise ValueError(f"utility has m={self.utility.m} but grid has m={self.grid.m}")
        self.xi_points = np.atleast_2d(np.asarray(self.xi_points, dtype=float))
        if self.xi_points.shape[0] == 0:
            raise ValueError("The grid has no points inside Xi")
        if self.mu_disc is not None:
            self.mu_disc.check_on(self.grid)

    @classmethod
    def build(
        cls,
        utility: UtilityModel,
        grid: GridSpec,
        samples: np.ndarray | DiscreteMeasure | None,
        *,
        eta1: float,
        eta2: float,
        p: float,
        delta: float,
        max_points: int = DEFAULT_MAX_POINTS,
        xi_points: np.ndarray | None = None,
    ) -> "DROProblem":
        """Enumerate the grid and snap the reference samples onto it."""
        if xi_points is None:
            xi_points = enumerate_points(grid, max_points=max_points)
        mu_disc = None if samples is None else discretise_measure(samples, grid)
        return cls(
            eta1=eta1,
            eta2=eta2,
            p=p,
            delta=delta,
            grid=grid,
            utility=utility,
            xi_points=xi_points,
            mu_disc=mu_disc,
        )

    @property
    def n_points(self) -> int:
        return int(self.xi_points.shape[0])

    @property
    def d(self) -> int:
        return self.utility.d

    @property
    def log_n(self) -> float:
        return math.log(self.n_points)


    # -- pointwise quantities -------------------------------------------------

    def costs(self, x: np.ndarray) -> np.ndarray:
        """|x - xi_j|^p for every grid point."""
        diff = self.xi_points - np.asarray(x, dtype=float).reshape(1, -1)
        sq = np.einsum("ij,ij->i", diff, diff)
        if self.p == 2:
            return sq
        return np.sqrt(sq) ** self.p

    def cost_matrix(self, xs: np.ndarray) -> np.ndarray:
        """|x_i - xi_j|^p with shape (len(xs), N)."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        sq = np.empty((xs.shape[0], self.n_points))
        for rows in self._chunks(xs.shape[0], per_row=self.n_points * self.grid.m):
            diff = self.xi_points[None, :, :] - xs[rows, None, :]
            sq[rows] = np.einsum("knm,knm->kn", diff, diff)
        if self.p == 2:
            return sq
        return np.sqrt(sq) ** self.p

    def scores(self, thetabar: ThetaBar, x: np.ndarray) -> np.ndarray:
        values = self.utility.u_values(thetabar.theta, self.xi_points)
        return values - iota(thetabar.alpha) * self.costs(x)

    def score(self, thetabar: ThetaBar, x: np.ndarray, j: int) -> float:
        if not 0 <= j < self.n_points:
            raise IndexError(f"Grid index {j} out of range [0, {self.n_points})")
        xi = self.xi_points[j]
        diff = np.asarray(x, dtype=float) - xi
        dist = float(np.sqrt(diff @ diff))
        return self.utility.u_value(thetabar.theta, xi) - iota(thetabar.alpha) * dist**self.p

    def softmax_weights(self, thetabar: ThetaBar, x: np.ndarray) -> np.ndarray:
        return self._weights(self.scores(thetabar, x))

    def _weights(self, scores: np.ndarray) -> np.ndarray:
        return softmax(scores / self.delta)

    def _log_mean_exp(self, scores: np.ndarray) -> float:
        top = float(np.max(scores))
        return top + self.delta * (float(logsumexp((scores - top) / self.delta)) - self.log_n)

    def smoothed_value(self, thetabar: ThetaBar, x: np.ndarray) -> float:
        """V(theta_bar, x): delta log((1/N) sum_j exp(s_j / delta))."""
        return self._log_mean_exp(self.scores(thetabar, x))

    def regulariser(self, thetabar: ThetaBar) -> float:
        return 0.5 * self.eta1 * float(thetabar.theta @ thetabar.theta) + 0.5 * self.eta2 * iota(
            thetabar.alpha
        ) ** 2

    def tilde_value(self, thetabar: ThetaBar, x: np.ndarray) -> float:
        return self.smoothed_value(thetabar, x) + self.regulariser(thetabar)

    def smoothed_gradient(self, thetabar: ThetaBar, x: np.ndarray) -> np.ndarray:
        """Gradient of V (no regularisers) with respect to (theta, alpha)."""
        values, grads = self.utility.evaluate(thetabar.theta, self.xi_points)
        costs = self.costs(x)
        weights = self._weights(values - iota(thetabar.alpha) * costs)
        return np.append(weights @ grads, -iota_prime(thetabar.alpha) * float(weights @ costs))

    def stochastic_gradient(self, thetabar: ThetaBar, x: np.ndarray) -> np.ndarray:
        """H(theta_bar, x), the gradient of the smoothed objective plus regularisers."""
        grad = self.smoothed_gradient(thetabar, x)
        grad[:-1] += self.eta1 * thetabar.theta
        grad[-1] += self.eta2 * iota(thetabar.alpha) * iota_prime(thetabar.alpha)
        return grad

    # -- integrated objectives ------------------------------------------------

    def _require_measure(self) -> DiscreteMeasure:
        if self.mu_disc is None or self.mu_disc.size == 0:
            raise ProblemStateError("This problem has no reference measure to integrate against")
        return self.mu_disc

    def _chunks(self, count: int, per_row: int | None = None):
        step = max(1, CHUNK_ELEMENTS // (per_row or self.n_points))
        for start in range(0, count, step):
            yield slice(start, min(start + step, count))

    def _integrated(self, thetabar: ThetaBar, smoothed: bool) -> float:
        measure = self._require_measure()
        values = self.utility.u_values(thetabar.theta, self.xi_points)
        weight = iota(thetabar.alpha)
        total = 0.0
        for rows in self._chunks(measure.size):
            scores = values[None, :] - weight * self.cost_matrix(measure.points[rows])
            if smoothed:
                top = scores.max(axis=1)
                inner = top + self.delta * (
                    logsumexp((scores - top[:, None]) / self.delta, axis=1) - self.log_n
                )
            else:
                inner = scores.max(axis=1)
            total += float(measure.masses[rows] @ inner)
        return total + self.regulariser(thetabar)

    def v_delta_full(self, thetabar: ThetaBar) -> float:
        """Integral of the smoothed objective (with regularisers) against mu_disc."""
        return self._integrated(thetabar, smoothed=True)

    def v_nonsmoothed(self, thetabar: ThetaBar) -> float:
        """Same integral with the hard maximum over grid points."""
        return self._integrated(thetabar, smoothed=False)

    def sup_u(self, theta: np.ndarray) -> float:
        """Upper bound on sup_x |U(theta, x)| used by kappa_theta."""
        ktilde = self.utility.ktilde_nabla(self.grid.lo, self.grid.hi)
        return ktilde * (1.0 + self.grid.m_xi) ** self.utility.growth.nu * (
            1.0 + float(np.linalg.norm(theta))
        )

    def kappa_theta(self, theta: np.ndarray, sup_u: float | None = None) -> float:
        """Upper end of the search interval for the dual variable."""
        theta = np.asarray(theta, dtype=float)
        if sup_u is None:
            sup_u = self.sup_u(theta)
        ktilde = self.utility.ktilde_nabla(self.grid.lo, self.grid.hi)
        m_xi = self.grid.m_xi
        growth = ktilde * (1.0 + m_xi) ** self.utility.growth.nu * (1.0 + float(np.linalg.norm(theta)))
        return (2.0 / math.sqrt(self.eta2)) * (1.0 + sup_u + growth) + (
            2.0 ** (self.p + 2) * m_xi**self.p / self.eta2
        )

    def dual_objective(self, theta: np.ndarray):
        """The convex map a -> g(a) whose minimum over a >= 0 is u_discrete(theta)."""
        measure = self._require_measure()
        theta = np.asarray(theta, dtype=float)
        values = self.utility.u_values(theta, self.xi_points)
        reg = 0.5 * self.eta1 * float(theta @ theta)

        if measure.size * self.n_points <= 50 * CHUNK_ELEMENTS:
            costs = self.cost_matrix(measure.points)

            def g(a: float) -> float:
                inner = (values[None, :] - a * costs).max(axis=1)
                return float(measure.masses @ inner) + reg + 0.5 * self.eta2 * a * a

        else:

            def g(a: float) -> float:
                total = 0.0
                for rows in self._chunks(measure.size):
                    inner = (values[None, :] - a * self.cost_matrix(measure.points[rows])).max(axis=1)
                    total += float(measure.masses[rows] @ inner)
                return total + reg + 0.5 * self.eta2 * a * a

        return g

    def u_discrete_argmin(self, theta: np.ndarray) -> tuple[float, float]:
        """(u_discrete(theta), minimising dual variable)."""
        g = self.dual_objective(theta)
        result = golden_section(g, 0.0, self.kappa_theta(theta), tol=DUAL_TOL)
        return result.minimum, result.argmin

    def u_discrete(self, theta: np.ndarray) -> float:
        """Discretised primal value through the one-dimensional dual."""
        return self.u_discrete_argmin(theta)[0]
