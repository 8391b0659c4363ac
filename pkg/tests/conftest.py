import logging
from pathlib import Path

import numpy as np
import pytest
import yaml

from robustsgld.grid import GridSpec
from robustsgld.model import RegressionNet
from robustsgld.models import ExperimentConfig
from robustsgld.objective import DROProblem

TINY_CONFIG = {
    "m": 2,
    "theta_star": [-0.5, 0.2],
    "theta_bar_0": [-1.0, -1.0, 0.0],
    "eta2_list": [1.0],
    "n_iter": 20,
    "n_train": 200,
    "n_test": 100,
    "seeds": [0],
    "record_every": 10,
}


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def small_grid() -> GridSpec:
    return GridSpec.box(m=2, bound=1.5, ell=2, jj=2)


@pytest.fixture
def small_problem(small_grid) -> DROProblem:
    """RegressionNet(2) on a 13x13 grid with 50 uniform reference samples."""
    samples = np.random.default_rng(7).uniform(-1.5, 1.5, size=(50, 2))
    return DROProblem.build(
        RegressionNet(2), small_grid, samples, eta1=1e-3, eta2=1.0, p=2.0, delta=0.1
    )


@pytest.fixture
def isolated_env(tmp_path, monkeypatch) -> Path:
    """Working directory and HOME without any robustsgld configuration."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("HOME", str(tmp_path))
    for name in (
        "ROBUSTSGLD_CONFIG",
        "ROBUSTSGLD_OUTPUT_DIR",
        "ROBUSTSGLD_N_ITER",
        "ROBUSTSGLD_SEEDS",
        "ROBUSTSGLD_WORKERS",
        "ROBUSTSGLD_SNAP_SAMPLES",
        "ROBUSTSGLD_LOG_LEVEL",
    ):
        monkeypatch.delenv(name, raising=False)
    return tmp_path


@pytest.fixture
def tiny_config_file(isolated_env) -> Path:
    path = isolated_env / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY_CONFIG), encoding="utf-8")
    return path


@pytest.fixture
def tiny_config() -> ExperimentConfig:
    return ExperimentConfig.model_validate(TINY_CONFIG)


@pytest.fixture(autouse=True)
def reset_logging():
    """Undo the CLI's handler setup so caplog sees library records."""
    yield
    logger = logging.getLogger("robustsgld")
    logger.handlers.clear()
    logger.setLevel(logging.NOTSET)
    logger.propagate = True
