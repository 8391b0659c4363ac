"""Utility functions U(theta, x) and the single-neuron regression instance."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class GrowthConstants:
    """Growth and regularity constants of a utility.

    K_nabla, nu bound the gradient, |grad U(theta, x)| <= K_nabla (1+|x|)^nu;
    L_nabla is the Lipschitz constant of the gradient in theta; J_U and chi
    control the variation of U in x.
    """

    K_nabla: float
    L_nabla: float
    nu: float
    J_U: float
    chi: float


class UtilityModel(ABC):
    """A utility U(theta, x) with a hand-coded gradient in theta.

    Implementations provide the batched ``evaluate``; the scalar methods are
    convenience wrappers around it.
    """

    d: int
    m: int
    growth: GrowthConstants

    @abstractmethod
    def evaluate(self, theta: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return U(theta, x) with shape (N,) and grad_theta U with shape (N, d) for (N, m) points."""

    @abstractmethod
    def max_abs_u0(self, lo: np.ndarray, hi: np.ndarray) -> float:
        """max over the box [lo, hi] of |U(0, x)|."""

    def u_values(self, theta: np.ndarray, points: np.ndarray) -> np.ndarray:
        return self.evaluate(theta, points)[0]

    def u_value(self, theta: np.ndarray, x: np.ndarray) -> float:
        values, _ = self.evaluate(theta, np.atleast_2d(np.asarray(x, dtype=float)))
        return float(values[0])

    def u_grad(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        _, grads = self.evaluate(theta, np.atleast_2d(np.asarray(x, dtype=float)))
        return grads[0]

    def ktilde_nabla(self, lo: np.ndarray, hi: np.ndarray) -> float:
        return max(self.growth.K_nabla, self.max_abs_u0(lo, hi))

    def growth_bound_u(self, theta: np.ndarray, x: np.ndarray, ktilde: float) -> float:
        """Upper bound Ktilde (1+|x|)^nu (1+|theta|) on |U(theta, x)|."""
        return float(
            ktilde
            * (1.0 + np.linalg.norm(x)) ** self.growth.nu
            * (1.0 + np.linalg.norm(theta))
        )


class RegressionNet(UtilityModel):
    """Squared loss of a sigmoid neuron, U(theta, x) = (y - sigmoid(<w, z> + b0))^2.

    The data point is x = (z, y) with z in R^{m-1}; the parameter is
    theta = (w, b0), so d = m.
    """

    def __init__(self, m: int) -> None:
        if m < 1:
            raise ValueError(f"m must be at least 1, got {m}")
        self.m = m
        self.d = m
        self.growth = GrowthConstants(
            K_nabla=2.0 * m,
            L_nabla=6.0 * m,
            nu=3.0,
            J_U=4.0,
            chi=1.0,
        )

    def __repr__(self) -> str:
        return f"RegressionNet(m={self.m})"

    def _split_theta(self, theta: np.ndarray) -> tuple[np.ndarray, float]:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape[0] != self.d:
            raise ValueError(f"theta has length {theta.shape[0]}, expected {self.d}")
        return theta[:-1], float(theta[-1])

    def predict(self, theta: np.ndarray, z: np.ndarray) -> np.ndarray | float:
        """sigmoid(<w, z> + b0) for one z or for rows of z."""
        w, b0 = self._split_theta(theta)
        z = np.asarray(z, dtype=float)
        out = expit(z @ w + b0)
        return float(out) if np.ndim(out) == 0 else out

    def evaluate(self, theta: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w, b0 = self._split_theta(theta)
        points = np.atleast_2d(np.asarray(points, dtype=float))
        z = points[:, :-1]
        y = points[:, -1]
        sigma = expit(z @ w + b0)
        residual = y - sigma
        # d/dtheta of (y - s)^2 with s = sigmoid(<w, z> + b0) and features (z, 1).
        coeff = -2.0 * residual * sigma * (1.0 - sigma)
        grads = np.empty((points.shape[0], self.d))
        grads[:, :-1] = coeff[:, None] * z
        grads[:, -1] = coeff
        return residual**2, grads

    def max_abs_u0(self, lo: np.ndarray, hi: np.ndarray) -> float:
        # U(0, x) = (y - 1/2)^2 is largest at an end of the y range.
        y_lo, y_hi = float(lo[-1]), float(hi[-1])
        return max((y_lo - 0.5) ** 2, (y_hi - 0.5) ** 2)
