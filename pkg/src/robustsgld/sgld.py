"""Robust SGLD on (theta, alpha) and the vanilla SGLD baseline on theta."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .grid import snap
from .model import UtilityModel
from .objective import DROProblem, ThetaBar

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12

Hook = Callable[[np.ndarray], float]
Monitor = Callable[[int, np.ndarray, float], None]


class DivergenceError(RuntimeError):
    """Raised when an iterate becomes non-finite or leaves the divergence guard."""

    def __init__(self, iteration: int, state: np.ndarray, tag: str = "") -> None:
        self.iteration = iteration
        self.state = np.asarray(state, dtype=float)
        self.tag = tag
        prefix = f"[{tag}] " if tag else ""
        super().__init__(f"{prefix}SGLD diverged at iteration {iteration}")


class SGLDConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(alias="lambda", gt=0, description="Step size")
    beta: float = Field(gt=0, description="Inverse temperature")
    n_iter: int = Field(ge=1, description="Number of iterations")
    seed: int = Field(default=0, description="Seed of the sampling and noise stream")
    snap_samples: bool = Field(default=False, description="Snap data points to the grid before use")
    record_every: int = Field(default=10, ge=1, description="Trajectory thinning stride")

    @property
    def noise_scale(self) -> float:
        return math.sqrt(2.0 * self.lambda_ / self.beta)


class EmpiricalSampler:
    """Uniform draws with replacement from the rows of a training set."""

    def __init__(self, data: np.ndarray) -> None:
        data = np.atleast_2d(np.asarray(data, dtype=float))
        if data.shape[0] == 0:
            raise ValueError("Cannot sample from an empty training set")
        self.data = data

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return self.data[rng.integers(self.data.shape[0])]


@dataclass
class Trajectory:
    """Thinned record of a run; ``metrics`` holds one list per hook."""

    iterations: list[int] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    elapsed_s: list[float] = field(default_factory=list)
    metrics: dict[str, list[float]] = field(default_factory=dict)
    wall_time_s: float = 0.0

    def record(self, iteration: int, state: np.ndarray, elapsed: float, hooks: dict[str, Hook]) -> None:
        self.iterations.append(iteration)
        self.states.append(state.copy())
        self.elapsed_s.append(elapsed)
        for name, hook in hooks.items():
            self.metrics.setdefault(name, []).append(float(hook(state)))

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_thetabar(self) -> ThetaBar:
        return ThetaBar.from_vector(self.final_state)


def _check_state(state: np.ndarray, iteration: int, tag: str) -> None:
    if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > DIVERGENCE_LIMIT:
        raise DivergenceError(iteration, state, tag)


def robust_step(
    problem: DROProblem,
    thetabar: ThetaBar,
    x: np.ndarray,
    config: SGLDConfig,
    noise: np.ndarray,
    iteration: int = 0,
    gradient: Callable[[ThetaBar, np.ndarray], np.ndarray] | None = None,
) -> ThetaBar:
    """One robust SGLD update theta_bar - lambda H(theta_bar, x) + sqrt(2 lambda / beta) noise."""
    grad_fn = gradient or problem.stochastic_gradient
    state = thetabar.as_vector()
    new = state - config.lambda_ * grad_fn(thetabar, x) + config.noise_scale * np.asarray(noise)
    _check_state(new, iteration, "robust")
    return ThetaBar.from_vector(new)


def _run(
    step: Callable[[np.ndarray, np.ndarray, np.ndarray, int], np.ndarray],
    sampler: EmpiricalSampler,
    config: SGLDConfig,
    state: np.ndarray,
    hooks: dict[str, Hook] | None,
    monitor: Monitor | None,
) -> Trajectory:
    hooks = hooks or {}
    rng = np.random.default_rng(config.seed)
    trajectory = Trajectory()
    elapsed = 0.0
    trajectory.record(0, state, elapsed, hooks)
    for n in range(1, config.n_iter + 1):
        started = time.perf_counter()
        x = sampler.draw(rng)
        noise = rng.standard_normal(state.shape[0])
        state = step(state, x, noise, n)
        elapsed += time.perf_counter() - started
        if monitor is not None:
            monitor(n, state, elapsed)
        if n % config.record_every == 0 or n == config.n_iter:
            trajectory.record(n, state, elapsed, hooks)
    trajectory.wall_time_s = elapsed
    return trajectory


def run_robust(
    problem: DROProblem,
    sampler: EmpiricalSampler,
    config: SGLDConfig,
    theta_bar_0: ThetaBar,
    hooks: dict[str, Hook] | None = None,
    monitor: Monitor | None = None,
    gradient: Callable[[ThetaBar, np.ndarray], np.ndarray] | None = None,
) -> Trajectory:
    """Run robust SGLD from ``theta_bar_0``.

    Each iteration draws one training point (snapped to the grid when
    ``config.snap_samples`` is on) and then one standard normal vector, both
    from a single generator seeded by ``config.seed``.

    Raises:
        DivergenceError: If an iterate leaves the divergence guard.
    """
    if theta_bar_0.theta.shape[0] != problem.d:
        raise ValueError(f"theta_bar_0 has d={theta_bar_0.theta.shape[0]}, expected {problem.d}")
    jj = problem.grid.jj

    def step(state: np.ndarray, x: np.ndarray, noise: np.ndarray, n: int) -> np.ndarray:
        if config.snap_samples:
            x = snap(x, jj)
        return robust_step(
            problem, ThetaBar.from_vector(state), x, config, noise, iteration=n, gradient=gradient
        ).as_vector()

    logger.debug("robust SGLD: eta2=%g n_iter=%d seed=%d", problem.eta2, config.n_iter, config.seed)
    return _run(step, sampler, config, theta_bar_0.as_vector(), hooks, monitor)


def run_vanilla(
    model: UtilityModel,
    sampler: EmpiricalSampler,
    config: SGLDConfig,
    theta_0: np.ndarray,
    hooks: dict[str, Hook] | None = None,
    monitor: Monitor | None = None,
) -> Trajectory:
    """Plain SGLD on U: theta - lambda grad U(theta, x) + sqrt(2 lambda / beta) noise.

    Samples are used raw, without regularisation.
    """
    theta_0 = np.asarray(theta_0, dtype=float).reshape(-1)
    if theta_0.shape[0] != model.d:
        raise ValueError(f"theta_0 has length {theta_0.shape[0]}, expected {model.d}")
    scale = config.noise_scale

    def step(state: np.ndarray, x: np.ndarray, noise: np.ndarray, n: int) -> np.ndarray:
        new = state - config.lambda_ * model.u_grad(state, x) + scale * noise
        _check_state(new, n, "vanilla")
        return new

    logger.debug("vanilla SGLD: n_iter=%d seed=%d", config.n_iter, config.seed)
    return _run(step, sampler, config, theta_0, hooks, monitor)
