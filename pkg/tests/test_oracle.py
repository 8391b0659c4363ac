import itertools

import numpy as np
import pytest

from robustsgld.oracle import (
    OracleError,
    TinyInstance,
    dual_bracket,
    dual_value,
    duality_gap,
    primal_value,
    random_instance,
    transport_cost,
)


def _cost(points: np.ndarray, p: float = 2.0) -> np.ndarray:
    return np.abs(points[:, None] - points[None, :]) ** p


class TestTransportCost:
    def test_identical_measures_cost_nothing(self) -> None:
        """Test that moving a measure onto itself costs nothing."""
        mu = np.array([0.2, 0.5, 0.3])
        assert transport_cost(mu, mu, _cost(np.array([0.0, 1.0, 3.0]))) == pytest.approx(0.0, abs=1e-12)

    def test_two_point_shift(self) -> None:
        """Test that shifting a unit mass by one costs one."""
        points = np.array([0.0, 1.0])
        mu, nu = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert transport_cost(mu, nu, _cost(points)) == pytest.approx(1.0)
        assert transport_cost(mu, nu, _cost(points), points_1d=points, p=2.0) == pytest.approx(1.0)

    def test_symmetric(self, rng) -> None:
        """Test that the cost is symmetric in its marginals."""
        points = rng.uniform(-1.0, 1.0, size=4)
        mu, nu = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        mu, nu = mu / mu.sum(), nu / nu.sum()
        cost = _cost(points)
        assert transport_cost(mu, nu, cost) == pytest.approx(transport_cost(nu, mu, cost), abs=1e-10)

    def test_lp_agrees_with_monotone_coupling(self, rng) -> None:
        """Test that the LP and the monotone coupling agree in one dimension."""
        for _ in range(20):
            points = rng.uniform(-1.0, 1.0, size=4)
            mu, nu = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
            mu, nu = mu / mu.sum(), nu / nu.sum()
            nu[-1] = 1.0 - nu[:-1].sum()
            lp = transport_cost(mu, nu, _cost(points))
            monotone = transport_cost(mu, nu, _cost(points), points_1d=points, p=2.0)
            assert lp == pytest.approx(monotone, abs=1e-9)

    def test_matches_enumerated_couplings(self) -> None:
        """Test that the LP matches an exhaustive search over integral couplings."""
        # Integer marginals have integral optimal couplings, so a grid search is exact.
        points = np.array([[0.0, 0.0], [1.0, 0.5], [-0.5, 1.0]])
        diff = points[:, None, :] - points[None, :, :]
        cost = np.sum(diff**2, axis=2)
        a, b = np.array([7, 9, 4]), np.array([3, 6, 11])
        best = np.inf
        ranges = (range(a[0] + 1), range(a[0] + 1), range(a[1] + 1), range(a[1] + 1))
        for p00, p01, p10, p11 in itertools.product(*ranges):
            plan = np.empty((3, 3))
            plan[0, :2] = p00, p01
            plan[1, :2] = p10, p11
            plan[0, 2] = a[0] - p00 - p01
            plan[1, 2] = a[1] - p10 - p11
            plan[2, :] = b - plan[0, :] - plan[1, :]
            if np.any(plan < 0) or plan[2].sum() != a[2]:
                continue
            best = min(best, float(np.sum(plan * cost)))
        assert transport_cost(a / 20.0, b / 20.0, cost) == pytest.approx(best / 20.0, abs=1e-9)

    def test_mass_mismatch(self) -> None:
        """Test that inconsistent marginals and cost shapes are rejected."""
        with pytest.raises(OracleError, match="Mass mismatch"):
            transport_cost(np.array([0.5, 0.5]), np.array([0.5, 0.6]), np.zeros((2, 2)))
        with pytest.raises(OracleError, match="sizes"):
            transport_cost(np.array([0.5, 0.5]), np.array([0.5, 0.5]), np.zeros((3, 3)))
        with pytest.raises(OracleError, match="nonnegative"):
            transport_cost(np.array([1.5, -0.5]), np.array([0.5, 0.5]), np.zeros((2, 2)))


class TestTinyInstance:
    def test_validation(self) -> None:
        """Test that malformed tiny instances are rejected."""
        with pytest.raises(OracleError, match="at most 4"):
            TinyInstance(np.arange(5.0), np.zeros(5), np.full(5, 0.2), eta2=1.0)
        with pytest.raises(OracleError, match="distinct"):
            TinyInstance(np.array([0.0, 0.0]), np.zeros(2), np.array([0.5, 0.5]), eta2=1.0)
        with pytest.raises(OracleError, match="expected 1"):
            TinyInstance(np.array([0.0, 1.0]), np.zeros(2), np.array([0.5, 0.4]), eta2=1.0)
        with pytest.raises(OracleError, match="eta2"):
            TinyInstance(np.array([0.0, 1.0]), np.zeros(2), np.array([0.5, 0.5]), eta2=0.0)
        with pytest.raises(OracleError, match="same length"):
            TinyInstance(np.array([0.0, 1.0]), np.zeros(3), np.array([0.5, 0.5]), eta2=1.0)

    def test_one_dimensional_support_is_reshaped(self) -> None:
        """Test that a flat support becomes a column and gets squared distances."""
        instance = TinyInstance(np.array([0.0, 2.0]), np.zeros(2), np.array([0.5, 0.5]), eta2=1.0)
        assert instance.support.shape == (2, 1)
        np.testing.assert_array_equal(instance.cost_matrix, [[0.0, 4.0], [4.0, 0.0]])


class TestDuality:
    def test_single_point_has_no_gap(self) -> None:
        """Test that a single atom closes the duality gap."""
        instance = TinyInstance(np.array([0.3]), np.array([0.7]), np.array([1.0]), eta2=2.0)
        assert primal_value(instance) == pytest.approx(0.7)
        assert duality_gap(instance) <= 1e-9

    def test_constant_utility(self) -> None:
        """Test that a constant utility gives the same primal and dual value."""
        instance = TinyInstance(
            np.array([-1.0, 0.0, 1.0]), np.full(3, 0.4), np.array([0.2, 0.3, 0.5]), eta2=1.0
        )
        assert primal_value(instance) == pytest.approx(0.4, abs=1e-9)
        assert dual_value(instance) == pytest.approx(0.4, abs=1e-9)

    def test_penalty_extremes(self) -> None:
        """Test that the penalty limits give the mean and the maximum utility."""
        support = np.array([-1.0, 0.0, 1.0])
        u = np.array([0.1, 0.5, 0.9])
        mu0 = np.array([0.5, 0.3, 0.2])
        stiff = TinyInstance(support, u, mu0, eta2=1e-6)
        assert primal_value(stiff) == pytest.approx(float(mu0 @ u), abs=1e-3)
        assert dual_value(stiff) == pytest.approx(float(mu0 @ u), abs=1e-3)
        loose = TinyInstance(support, u, mu0, eta2=1e6)
        assert primal_value(loose) == pytest.approx(0.9, abs=1e-3)
        assert dual_value(loose) == pytest.approx(0.9, abs=1e-3)

    def test_bracket(self) -> None:
        """Test the dual bracket on a hand-computed instance."""
        instance = TinyInstance(np.array([0.0, 1.0]), np.array([-3.0, 1.0]), np.array([0.5, 0.5]), eta2=4.0)
        assert dual_bracket(instance) == pytest.approx(4.0)

    @pytest.mark.parametrize("m", [1, 2])
    def test_random_instances_close_the_gap(self, m) -> None:
        """Test that random tiny instances satisfy weak duality with a small gap."""
        rng = np.random.default_rng(100 + m)
        for _ in range(10):
            instance = random_instance(rng, k=3, m=m)
            primal, dual = primal_value(instance), dual_value(instance)
            assert primal <= dual + 1e-7
            assert dual - primal <= 2e-3

    def test_random_instance_shape(self, rng) -> None:
        """Test that random instances have the requested shape and a normalised measure."""
        instance = random_instance(rng, k=4, m=2, eta2=0.5)
        assert instance.support.shape == (4, 2)
        assert instance.eta2 == 0.5
        assert instance.mu0.sum() == pytest.approx(1.0, abs=1e-12)
