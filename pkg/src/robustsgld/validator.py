from __future__ import annotations

from dataclasses import dataclass

from .constants import ConstantsBundle
from .experiment import CORRUPT_Z_RANGE
from .grid import DEFAULT_MAX_POINTS
from .models import ExperimentConfig

LARGE_GRID = 10**6


@dataclass
class ValidationIssue:
    level: str
    message: str


@dataclass
class ValidationResult:
    issues: list[ValidationIssue]

    @property
    def ok(self) -> bool:
        return not any(issue.level == "error" for issue in self.issues)


def validate_experiment_config(config: ExperimentConfig) -> ValidationResult:
    """Checks that pydantic cannot express: grid size and data support."""
    issues: list[ValidationIssue] = []
    count = config.grid.count()
    if count > DEFAULT_MAX_POINTS:
        issues.append(
            ValidationIssue("error", f"Grid has {count} points, above the cap of {DEFAULT_MAX_POINTS}")
        )
    elif count > LARGE_GRID:
        issues.append(
            ValidationIssue("warning", f"Grid has {count} points; every robust step visits all of them")
        )

    if config.q > 0 and CORRUPT_Z_RANGE[1] > config.xi_bound:
        issues.append(
            ValidationIssue(
                "warning",
                f"Corrupted features reach {CORRUPT_Z_RANGE[1]} but Xi stops at {config.xi_bound}; rows will be clipped",
            )
        )
    if config.record_every > config.n_iter:
        issues.append(
            ValidationIssue(
                "warning",
                f"record_every={config.record_every} exceeds n_iter={config.n_iter}; only the endpoints are recorded",
            )
        )
    return ValidationResult(issues)


def check_step_size(step_size: float, bundle: ConstantsBundle) -> ValidationResult:
    """Warn when the step size is not below the theoretical maximum."""
    issues: list[ValidationIssue] = []
    if step_size >= bundle.lambda_max_delta:
        issues.append(
            ValidationIssue(
                "warning",
                f"lambda={step_size:g} is not below lambda_max_delta={bundle.lambda_max_delta:.3e}; "
                "the convergence guarantee does not cover this run",
            )
        )
    return ValidationResult(issues)
