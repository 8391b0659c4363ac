from robustsgld.constants import compute_bundle
from robustsgld.models import ExperimentConfig
from robustsgld.validator import check_step_size, validate_experiment_config


def test_default_config_validates() -> None:
    result = validate_experiment_config(ExperimentConfig())
    assert result.ok, [issue.message for issue in result.issues]
    assert result.issues == []


def test_large_grid_warns() -> None:
    result = validate_experiment_config(ExperimentConfig(jj=4))
    assert result.ok
    assert [issue.level for issue in result.issues] == ["warning"]
    assert "every robust step visits" in result.issues[0].message


def test_grid_above_cap_is_an_error() -> None:
    result = validate_experiment_config(ExperimentConfig(jj=5))
    assert not result.ok
    assert "above the cap" in result.issues[0].message


def test_clipped_corruption_warns() -> None:
    result = validate_experiment_config(ExperimentConfig(xi_bound=2.2))
    assert result.ok
    assert any("clipped" in issue.message for issue in result.issues)
    assert validate_experiment_config(ExperimentConfig(xi_bound=2.2, q=0.0)).issues == []


def test_sparse_recording_warns() -> None:
    result = validate_experiment_config(ExperimentConfig(n_iter=5, record_every=10))
    assert result.ok
    assert "only the endpoints" in result.issues[0].message


def test_step_size_against_theoretical_maximum(small_problem) -> None:
    bundle = compute_bundle(small_problem, small_problem.mu_disc, 1.0, beta=1e9, allow_surrogate=False)
    too_large = check_step_size(0.01, bundle)
    assert too_large.ok
    assert len(too_large.issues) == 1
    assert "lambda_max_delta" in too_large.issues[0].message
    assert check_step_size(bundle.lambda_max_delta / 2, bundle).issues == []
