"""Verification suites behind ``robustsgld verify``.

Each suite checks one analytic property of the solver on small seeded
problems and reports one CheckResult per property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from rich.console import Console
from rich.table import Table

from .constants import compute_bundle
from .grid import GridSpec
from .model import RegressionNet
from .objective import DROProblem, ThetaBar
from .oracle import TinyInstance, dual_value, primal_value, random_instance

GAP_TOL = 2e-3
GRADIENT_RTOL = 1e-5
FD_STEP = 1e-6
QUADRATURE_SLOPE = -0.8

Gradient = Callable[[ThetaBar, np.ndarray], np.ndarray]


@dataclass
class CheckResult:
    __test__ = False
    suite: str
    name: str
    status: str
    message: str

    @property
    def passed(self) -> bool:
        return self.status == "pass"


class VerifyContext:
    """Shared state of a verification run: seed, test problem and gradient under test."""

    def __init__(self, seed: int = 0, gradient_fault: float = 0.0):
        self.seed = seed
        self.gradient_fault = gradient_fault
        self.results: list[CheckResult] = []

    def rng(self, offset: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, offset])

    def add_result(self, suite: str, name: str, passed: bool, message: str = "") -> None:
        self.results.append(CheckResult(suite, name, "pass" if passed else "fail", message))

    @property
    def all_passed(self) -> bool:
        return all(result.passed for result in self.results)

    @cached_property
    def problem(self) -> DROProblem:
        grid = GridSpec.box(m=2, bound=1.5, ell=2, jj=2)
        samples = self.rng(99).uniform(-1.5, 1.5, size=(50, 2))
        return DROProblem.build(
            RegressionNet(2), grid, samples, eta1=1e-3, eta2=1.0, p=2.0, delta=0.1
        )

    def gradient(self, problem: DROProblem) -> Gradient:
        """The gradient under test, optionally with a deliberate fault injected."""
        if not self.gradient_fault:
            return problem.stochastic_gradient
        fault = self.gradient_fault

        def corrupted(thetabar: ThetaBar, x: np.ndarray) -> np.ndarray:
            grad = problem.stochastic_gradient(thetabar, x)
            grad[0] += fault * max(1.0, float(np.linalg.norm(grad)))
            return grad

        return corrupted

    def random_point(self, rng: np.random.Generator, radius: float) -> tuple[ThetaBar, np.ndarray]:
        grid = self.problem.grid
        vector = rng.uniform(-radius, radius, size=self.problem.d + 1)
        x = rng.uniform(grid.lo, grid.hi)
        return ThetaBar.from_vector(vector), x


def finite_difference_gradient(
    f: Callable[[ThetaBar], float], thetabar: ThetaBar, h: float = FD_STEP
) -> np.ndarray:
    base = thetabar.as_vector()
    grad = np.empty_like(base)
    for i in range(base.shape[0]):
        step = np.zeros_like(base)
        step[i] = h
        grad[i] = (f(ThetaBar.from_vector(base + step)) - f(ThetaBar.from_vector(base - step))) / (2.0 * h)
    return grad


def gradient_error(problem: DROProblem, gradient: Gradient, thetabar: ThetaBar, x: np.ndarray) -> float:
    """Relative distance between ``gradient`` and central differences of the smoothed objective."""
    fd = finite_difference_gradient(lambda tb: problem.tilde_value(tb, x), thetabar)
    return float(np.linalg.norm(gradient(thetabar, x) - fd) / max(1.0, np.linalg.norm(fd)))


def check_duality(context: VerifyContext, count: int = 100) -> None:
    rng = context.rng(1)
    instances = [random_instance(rng, k=3, m=1 + (i % 2)) for i in range(count)]
    base = instances[0]
    for eta2 in (1e-6, 1e6):
        instances.append(TinyInstance(base.support, base.u_values, base.mu0, eta2=eta2))

    gaps = []
    weak_violation = 0.0
    for instance in instances:
        primal = primal_value(instance)
        dual = dual_value(instance)
        gaps.append(abs(primal - dual))
        weak_violation = max(weak_violation, primal - dual)
    worst = max(gaps)
    context.add_result(
        "duality", "duality gap", worst <= GAP_TOL, f"max gap {worst:.2e} over {len(instances)} instances"
    )
    context.add_result(
        "duality", "weak duality", weak_violation <= GAP_TOL, f"max primal - dual {weak_violation:.2e}"
    )


def check_sandwich(context: VerifyContext, count: int = 100) -> None:
    rng = context.rng(2)
    base = context.problem
    for delta in (0.01, 0.1, 1.0):
        problem = DROProblem(
            eta1=base.eta1,
            eta2=base.eta2,
            p=base.p,
            delta=delta,
            grid=base.grid,
            utility=base.utility,
            xi_points=base.xi_points,
            mu_disc=base.mu_disc,
        )
        failures = 0
        for _ in range(count):
            thetabar, x = context.random_point(rng, radius=5.0)
            value = problem.smoothed_value(thetabar, x)
            top = float(np.max(problem.scores(thetabar, x)))
            slack = 1e-12 * max(1.0, abs(top))
            if not (value <= top + slack and top <= value + delta * problem.log_n + slack):
                failures += 1
        context.add_result(
            "sandwich",
            f"log-mean-exp sandwich (delta={delta:g})",
            failures == 0,
            f"{failures} of {count} points violate the bound",
        )


def check_dissipativity(context: VerifyContext, count: int = 10_000) -> None:
    rng = context.rng(3)
    problem = context.problem
    bundle = compute_bundle(
        problem, problem.mu_disc, 0.0, beta=1e9, allow_surrogate=False
    )
    gradient = context.gradient(problem)
    worst = math.inf
    for _ in range(count):
        direction = rng.standard_normal(problem.d + 1)
        direction /= np.linalg.norm(direction)
        vector = direction * rng.uniform(0.0, 100.0)
        x = rng.uniform(problem.grid.lo, problem.grid.hi)
        thetabar = ThetaBar.from_vector(vector)
        margin = float(vector @ gradient(thetabar, x)) - (bundle.a * float(vector @ vector) - bundle.b)
        worst = min(worst, margin)
    context.add_result(
        "dissipativity",
        "<theta_bar, H> >= a|theta_bar|^2 - b",
        worst >= 0.0,
        f"smallest margin {worst:.3e} over {count} draws (a={bundle.a:.2e}, b={bundle.b:.3e})",
    )


def check_gradient(context: VerifyContext, count: int = 20) -> None:
    rng = context.rng(4)
    problem = context.problem
    gradient = context.gradient(problem)
    errors = []
    for _ in range(count):
        thetabar, x = context.random_point(rng, radius=2.0)
        errors.append(gradient_error(problem, gradient, thetabar, x))
    worst = max(errors)
    context.add_result(
        "gradient",
        "H matches finite differences",
        worst <= GRADIENT_RTOL,
        f"max relative error {worst:.2e} over {count} points",
    )


def quadrature_differences(jj_values: range = range(2, 9), samples: int = 2000, seed: int = 0) -> np.ndarray:
    """|u_discrete(jj) - u_discrete(jj+1)| for a fixed one-dimensional instance."""
    data = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(samples, 1))
    theta = np.array([0.3])
    model = RegressionNet(1)
    values = []
    for jj in jj_values:
        grid = GridSpec.box(m=1, bound=1.0, ell=2, jj=jj)
        problem = DROProblem.build(model, grid, data, eta1=1e-3, eta2=2.0, p=2.0, delta=0.1)
        values.append(problem.u_discrete(theta))
    return np.abs(np.diff(values))


def quadrature_slope(differences: np.ndarray, start: int = 2) -> float:
    jj = np.arange(start, start + differences.shape[0])
    slope, _ = np.polyfit(jj, np.log2(np.maximum(differences, 1e-300)), 1)
    return float(slope)


def check_quadrature(context: VerifyContext) -> None:
    slope = quadrature_slope(quadrature_differences(seed=context.seed))
    context.add_result(
        "quadrature",
        "u_discrete converges at rate 2^-jj",
        slope <= QUADRATURE_SLOPE,
        f"fitted log2 slope {slope:.3f}",
    )


SUITES: dict[str, Callable[[VerifyContext], None]] = {
    "duality": check_duality,
    "sandwich": check_sandwich,
    "dissipativity": check_dissipativity,
    "gradient": check_gradient,
    "quadrature": check_quadrature,
}


def run_suites(names: list[str] | None, context: VerifyContext) -> list[CheckResult]:
    """Run the named suites (all when ``names`` is empty) and return their results."""
    selected = names or list(SUITES)
    unknown = [name for name in selected if name not in SUITES]
    if unknown:
        raise ValueError(f"Unknown suite(s): {', '.join(unknown)}. Available: {', '.join(SUITES)}")
    for name in selected:
        SUITES[name](context)
    return context.results


def print_results(results: list[CheckResult], console: Console | None = None) -> None:
    console = console or Console()
    table = Table(title="Verification Results")
    table.add_column("Suite", style="cyan")
    table.add_column("Check")
    table.add_column("Status", justify="center")
    table.add_column("Details")
    for result in results:
        status = "[green]✓ PASS[/green]" if result.passed else "[red]✗ FAIL[/red]"
        table.add_row(result.suite, result.name, status, result.message)
    console.print(table)
    passed = sum(result.passed for result in results)
    console.print(f"{passed} passed, {len(results) - passed} failed")
