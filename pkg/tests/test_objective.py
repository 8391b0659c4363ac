import dataclasses
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from robustsgld.constants import compute_bundle
from robustsgld.grid import GridSpec
from robustsgld.harness import gradient_error
from robustsgld.model import RegressionNet
from robustsgld.objective import DROProblem, ProblemStateError, ThetaBar
from robustsgld.oracle import TinyInstance, primal_value
from robustsgld.penalty import dissipativity_constants, iota, iota_inverse


class ShiftedNet(RegressionNet):
    """RegressionNet with a constant added to every utility value."""

    def __init__(self, m: int, shift: float) -> None:
        super().__init__(m)
        self.shift = shift

    def evaluate(self, theta, points):
        values, grads = super().evaluate(theta, points)
        return values + self.shift, grads


def _one_dim_problem(xi: list[float], delta: float = 0.1) -> DROProblem:
    return DROProblem(
        eta1=1e-3,
        eta2=1.0,
        p=2.0,
        delta=delta,
        grid=GridSpec.box(m=1, bound=1.0, ell=2, jj=1),
        utility=RegressionNet(1),
        xi_points=np.array(xi)[:, None],
    )


def _random_thetabar(rng, d: int, radius: float) -> ThetaBar:
    return ThetaBar.from_vector(rng.uniform(-radius, radius, size=d + 1))


def test_thetabar_round_trip_and_validation() -> None:
    thetabar = ThetaBar.from_vector([1.0, 2.0, 0.5])
    np.testing.assert_array_equal(thetabar.theta, [1.0, 2.0])
    assert thetabar.alpha == 0.5
    assert thetabar.norm == pytest.approx(math.sqrt(5.25))
    with pytest.raises(ValueError, match="at least 2"):
        ThetaBar.from_vector([1.0])
    with pytest.raises(ValueError, match="finite"):
        ThetaBar(theta=np.array([np.nan]), alpha=0.0)


def test_problem_validation(small_problem) -> None:
    with pytest.raises(ValueError, match="positive"):
        dataclasses.replace(small_problem, eta2=0.0)
    with pytest.raises(ValueError, match="p must"):
        dataclasses.replace(small_problem, p=0.5)
    with pytest.raises(ValueError, match="utility has m=3"):
        dataclasses.replace(small_problem, utility=RegressionNet(3))


def test_build_snaps_reference_samples(small_problem) -> None:
    assert small_problem.n_points == 13 * 13
    assert small_problem.mu_disc.masses.sum() == pytest.approx(1.0, abs=1e-12)
    small_problem.mu_disc.check_on(small_problem.grid)


class TestScores:
    def test_score_matches_vector_and_direct_formula(self, small_problem, rng) -> None:
        thetabar = _random_thetabar(rng, 2, 2.0)
        x = rng.uniform(-1.5, 1.5, size=2)
        scores = small_problem.scores(thetabar, x)
        for j in (0, 17, 168):
            xi = small_problem.xi_points[j]
            direct = small_problem.utility.u_value(thetabar.theta, xi) - iota(thetabar.alpha) * float(
                np.sum((x - xi) ** 2)
            )
            assert small_problem.score(thetabar, x, j) == pytest.approx(direct, rel=1e-12, abs=1e-12)
            assert scores[j] == pytest.approx(direct, rel=1e-12, abs=1e-12)

    def test_zero_alpha_and_zero_distance(self, small_problem, rng) -> None:
        theta = rng.normal(size=2)
        xi = small_problem.xi_points[40]
        u = small_problem.utility.u_value(theta, xi)
        assert small_problem.score(ThetaBar(theta, 0.0), np.array([0.7, -0.2]), 40) == pytest.approx(u)
        assert small_problem.score(ThetaBar(theta, 1.3), xi, 40) == pytest.approx(u)

    def test_index_out_of_range(self, small_problem) -> None:
        with pytest.raises(IndexError):
            small_problem.score(ThetaBar.from_vector([0.0, 0.0, 0.0]), np.zeros(2), 169)


class TestSmoothing:
    def test_single_point_is_exact(self) -> None:
        problem = _one_dim_problem([0.5])
        thetabar = ThetaBar.from_vector([0.0, 0.4])
        x = np.array([0.25])
        np.testing.assert_array_equal(problem.softmax_weights(thetabar, x), [1.0])
        assert problem.smoothed_value(thetabar, x) == problem.scores(thetabar, x)[0]

    def test_two_point_hand_value(self) -> None:
        problem = _one_dim_problem([0.5, 0.5 + math.sqrt(0.1)])
        value = problem.smoothed_value(ThetaBar.from_vector([0.0, 0.0]), np.array([0.0]))
        assert value == pytest.approx(0.1 + 0.1 * math.log((math.exp(-1.0) + 1.0) / 2.0), rel=1e-12)

    def test_equal_scores_give_uniform_weights(self) -> None:
        problem = _one_dim_problem([0.0, 1.0])
        weights = problem.softmax_weights(ThetaBar.from_vector([0.0, 0.0]), np.array([0.3]))
        np.testing.assert_allclose(weights, [0.5, 0.5], atol=1e-15)

    def test_small_delta_concentrates_on_argmax(self, small_problem, rng) -> None:
        problem = dataclasses.replace(small_problem, delta=1e-4)
        concentrated = 0
        for _ in range(20):
            thetabar = _random_thetabar(rng, 2, 2.0)
            x = rng.uniform(-1.5, 1.5, size=2)
            weights = problem.softmax_weights(thetabar, x)
            assert int(np.argmax(weights)) == int(np.argmax(problem.scores(thetabar, x)))
            assert weights.sum() == pytest.approx(1.0, abs=1e-12)
            concentrated += weights.max() > 0.99
        assert concentrated >= 15

    def test_sandwich(self, small_problem, rng) -> None:
        for delta in (0.01, 0.1, 1.0):
            problem = dataclasses.replace(small_problem, delta=delta)
            for _ in range(100):
                thetabar = _random_thetabar(rng, 2, 5.0)
                x = rng.uniform(-1.5, 1.5, size=2)
                value = problem.smoothed_value(thetabar, x)
                top = float(np.max(problem.scores(thetabar, x)))
                assert value <= top + 1e-12
                assert top <= value + delta * problem.log_n + 1e-12

    def test_tilde_value_adds_regularisers(self, small_problem, rng) -> None:
        thetabar = _random_thetabar(rng, 2, 2.0)
        x = rng.uniform(-1.5, 1.5, size=2)
        expected = (
            small_problem.smoothed_value(thetabar, x)
            + 0.5e-3 * float(thetabar.theta @ thetabar.theta)
            + 0.5 * iota(thetabar.alpha) ** 2
        )
        assert small_problem.tilde_value(thetabar, x) == pytest.approx(expected, rel=1e-12)


class TestGradient:
    def test_matches_finite_differences(self, small_problem, rng) -> None:
        for _ in range(20):
            thetabar = _random_thetabar(rng, 2, 2.0)
            x = rng.uniform(-1.5, 1.5, size=2)
            assert gradient_error(small_problem, small_problem.stochastic_gradient, thetabar, x) <= 1e-5

    def test_alpha_block_vanishes_at_zero(self, small_problem) -> None:
        grad = small_problem.stochastic_gradient(ThetaBar.from_vector([0.4, -0.3, 0.0]), np.array([1.0, 0.5]))
        assert grad[-1] == 0.0

    def test_shift_invariance(self, small_problem, rng) -> None:
        shifted = dataclasses.replace(small_problem, utility=ShiftedNet(2, shift=3.0))
        for _ in range(10):
            thetabar = _random_thetabar(rng, 2, 2.0)
            x = rng.uniform(-1.5, 1.5, size=2)
            np.testing.assert_allclose(
                shifted.stochastic_gradient(thetabar, x),
                small_problem.stochastic_gradient(thetabar, x),
                rtol=0,
                atol=1e-12,
            )

    def test_growth_bound(self, small_problem, rng) -> None:
        growth = small_problem.utility.growth
        m_xi = small_problem.grid.m_xi
        bound = growth.K_nabla * (1 + m_xi) ** growth.nu + 2**2 * dissipativity_constants().M_iota * m_xi**2
        for _ in range(200):
            thetabar = _random_thetabar(rng, 2, 10.0)
            x = rng.uniform(-1.5, 1.5, size=2)
            assert np.linalg.norm(small_problem.smoothed_gradient(thetabar, x)) <= bound

    def test_local_lipschitz_bound(self, small_problem, rng) -> None:
        """Test that the drift moves by at most its local Lipschitz constant times the step."""
        bundle = compute_bundle(small_problem, small_problem.mu_disc, 0.0, beta=1e9, allow_surrogate=False)
        constant = bundle.L_delta + small_problem.eta1 + small_problem.eta2 * bundle.Ltilde_iota
        for _ in range(500):
            first, second = _random_thetabar(rng, 2, 10.0), _random_thetabar(rng, 2, 10.0)
            x = rng.uniform(-1.5, 1.5, size=2)
            moved = np.linalg.norm(
                small_problem.stochastic_gradient(first, x) - small_problem.stochastic_gradient(second, x)
            )
            distance = np.linalg.norm(first.as_vector() - second.as_vector())
            assert moved <= constant * (1.0 + np.linalg.norm(x)) ** 4 * distance


class TestIntegratedObjectives:
    def test_requires_reference_measure(self, small_problem) -> None:
        problem = dataclasses.replace(small_problem, mu_disc=None)
        with pytest.raises(ProblemStateError):
            problem.v_delta_full(ThetaBar.from_vector([0.0, 0.0, 0.0]))
        with pytest.raises(ProblemStateError):
            problem.u_discrete(np.zeros(2))

    def test_single_atom_measure(self, small_grid, rng) -> None:
        atom = np.array([[0.5, -0.25]])
        problem = DROProblem.build(RegressionNet(2), small_grid, atom, eta1=1e-3, eta2=1.0, p=2.0, delta=0.1)
        thetabar = _random_thetabar(rng, 2, 2.0)
        assert problem.v_delta_full(thetabar) == pytest.approx(problem.tilde_value(thetabar, atom[0]), rel=1e-12)

    def test_two_atom_measure_averages(self, small_grid, rng) -> None:
        atoms = np.array([[0.5, -0.25], [-1.0, 1.25]])
        problem = DROProblem.build(RegressionNet(2), small_grid, atoms, eta1=1e-3, eta2=1.0, p=2.0, delta=0.1)
        thetabar = _random_thetabar(rng, 2, 2.0)
        expected = 0.5 * (problem.tilde_value(thetabar, atoms[0]) + problem.tilde_value(thetabar, atoms[1]))
        assert problem.v_delta_full(thetabar) == pytest.approx(expected, rel=1e-12)

    def test_sandwich_and_delta_independence(self, small_problem, rng) -> None:
        other = dataclasses.replace(small_problem, delta=0.5)
        for _ in range(50):
            thetabar = _random_thetabar(rng, 2, 3.0)
            smooth = small_problem.v_delta_full(thetabar)
            hard = small_problem.v_nonsmoothed(thetabar)
            assert smooth <= hard + 1e-12
            assert hard <= smooth + small_problem.delta * small_problem.log_n + 1e-12
            assert other.v_nonsmoothed(thetabar) == hard


class TestDualEvaluation:
    def test_kappa_monotone_in_theta_and_eta2(self, small_problem) -> None:
        kappas = [small_problem.kappa_theta(np.full(2, r)) for r in (0.0, 0.5, 1.0, 4.0)]
        assert kappas == sorted(kappas)
        assert dataclasses.replace(small_problem, eta2=1e4).kappa_theta(np.zeros(2)) < small_problem.kappa_theta(
            np.zeros(2)
        )

    def test_matches_minimum_over_alpha(self, small_problem, rng) -> None:
        for _ in range(10):
            theta = rng.uniform(-2.0, 2.0, size=2)
            value, multiplier = small_problem.u_discrete_argmin(theta)
            kappa = small_problem.kappa_theta(theta)
            assert 0.0 <= multiplier <= kappa

            def along_alpha(alpha: float) -> float:
                return small_problem.v_nonsmoothed(ThetaBar(theta, alpha))

            scan = minimize_scalar(
                along_alpha, bounds=(0.0, iota_inverse(kappa)), method="bounded", options={"xatol": 1e-10}
            )
            assert value == pytest.approx(scan.fun, abs=1e-6)
            for alpha in np.linspace(0.0, iota_inverse(kappa), 25):
                assert value <= along_alpha(alpha) + 1e-6

    def test_matches_brute_force_primal(self) -> None:
        grid = GridSpec(m=1, ell=1, jj=1, xi_box=((-1.0, 0.5),))
        samples = np.array([[-1.0], [0.0], [0.0], [0.5]])
        problem = DROProblem.build(RegressionNet(1), grid, samples, eta1=1e-3, eta2=0.7, p=2.0, delta=0.1)
        theta = np.array([0.4])

        support = problem.xi_points
        mu0 = np.zeros(support.shape[0])
        for point, mass in zip(problem.mu_disc.points, problem.mu_disc.masses):
            mu0[np.flatnonzero(np.all(support == point, axis=1))[0]] = mass
        instance = TinyInstance(
            support=support,
            u_values=problem.utility.u_values(theta, support),
            mu0=mu0,
            eta2=problem.eta2,
        )
        regulariser = 0.5 * problem.eta1 * float(theta @ theta)
        assert problem.u_discrete(theta) - regulariser == pytest.approx(primal_value(instance), abs=1e-4)
