import numpy as np
import pytest
from rich.console import Console

from robustsgld.harness import (
    SUITES,
    VerifyContext,
    check_dissipativity,
    check_duality,
    check_gradient,
    check_quadrature,
    check_sandwich,
    print_results,
    quadrature_slope,
    run_suites,
)


@pytest.fixture
def context() -> VerifyContext:
    return VerifyContext(seed=0)


def _messages(context: VerifyContext) -> list[str]:
    return [f"{result.name}: {result.message}" for result in context.results if not result.passed]


def test_duality_suite(context) -> None:
    check_duality(context, count=10)
    assert [result.name for result in context.results] == ["duality gap", "weak duality"]
    assert context.all_passed, _messages(context)


def test_sandwich_suite(context) -> None:
    check_sandwich(context, count=20)
    assert len(context.results) == 3
    assert context.all_passed, _messages(context)


def test_dissipativity_suite(context) -> None:
    check_dissipativity(context, count=1000)
    assert context.all_passed, _messages(context)


def test_gradient_suite(context) -> None:
    check_gradient(context, count=5)
    assert context.all_passed, _messages(context)


def test_quadrature_suite(context) -> None:
    check_quadrature(context)
    assert context.all_passed, _messages(context)


def test_injected_gradient_fault_is_caught() -> None:
    context = VerifyContext(seed=0, gradient_fault=1e-2)
    check_gradient(context, count=3)
    assert not context.all_passed
    assert context.results[0].status == "fail"


def test_quadrature_slope_of_exact_rate() -> None:
    differences = 2.0 ** -np.arange(2, 9, dtype=float)
    assert quadrature_slope(differences) == pytest.approx(-1.0)


def test_run_suites_selection(context) -> None:
    results = run_suites(["quadrature"], context)
    assert [result.suite for result in results] == ["quadrature"]
    with pytest.raises(ValueError, match="Unknown suite"):
        run_suites(["nope"], VerifyContext())
    assert set(SUITES) == {"duality", "sandwich", "dissipativity", "gradient", "quadrature"}


def test_print_results(context) -> None:
    context.add_result("demo", "first", True, "fine")
    context.add_result("demo", "second", False, "broken")
    console = Console(record=True, width=120)
    print_results(context.results, console)
    text = console.export_text()
    assert "Verification Results" in text
    assert "1 passed, 1 failed" in text
