from __future__ import annotations

from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .grid import GridSpec
from .sgld import SGLDConfig


class ExperimentConfig(BaseModel):
    """Settings of the corrupted-regression study; defaults reproduce the reference setup."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)

    m: int = Field(default=4, ge=1, description="Data dimension (m-1 features plus the label)")
    p: float = Field(default=2.0, ge=1.0, description="Exponent of the transport cost |x - y|^p")
    eta1: float = Field(default=1e-3, gt=0, description="Parameter regularisation weight")
    eta2_list: List[float] = Field(
        default_factory=lambda: [0.01, 0.1, 0.5, 1.0, 1.5, 2.0],
        min_length=1,
        description="Model-uncertainty levels swept by robust SGLD",
    )
    delta: float = Field(default=0.1, gt=0, description="Smoothing tolerance")
    beta: float = Field(default=1e9, gt=0, description="Inverse temperature")
    lambda_: float = Field(default=0.01, gt=0, alias="lambda", description="Step size")
    n_iter: int = Field(default=25000, ge=1, description="Iterations per run")
    ell: int = Field(default=3, ge=1, description="Grid half-extent exponent")
    jj: int = Field(default=1, ge=1, description="Grid mesh exponent")
    theta_star: List[float] = Field(
        default_factory=lambda: [-0.5, 0.5, 0.1, -0.2], description="Data-generating parameter"
    )
    theta_bar_0: List[float] = Field(
        default_factory=lambda: [-2.0, -2.0, -2.0, -2.0, 0.0],
        description="Initial (theta, alpha) for robust SGLD; its theta part starts vanilla SGLD",
    )
    q: float = Field(default=0.3, ge=0.0, le=1.0, description="Corruption probability")
    n_train: int = Field(default=10000, ge=1, description="Training set size")
    n_test: int = Field(default=5000, ge=1, description="Test set size")
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    snap_samples: bool = Field(default=False, description="Snap training points to the grid in robust SGLD")
    record_every: int = Field(default=10, ge=1, description="Trace thinning stride")

    xi_bound: float = Field(default=3.0, gt=0, description="Xi is the box [-xi_bound, xi_bound]^m")
    reuse_corruption_noise: bool = Field(
        default=False, description="Corrupt labels with the row's own Bernoulli draw instead of a fresh one"
    )
    workers: int = Field(default=1, ge=1, description="Parallel worker processes for repeats")
    eval_v_delta: bool = Field(default=True, description="Record the integrated smoothed objective in traces")
    output_dir: Optional[Path] = Field(default=None, description="Directory for traces and reports")

    @field_validator("eta2_list")
    @classmethod
    def _positive_eta2(cls, value: List[float]) -> List[float]:
        if any(eta2 <= 0 for eta2 in value):
            raise ValueError(f"every eta2 must be positive, got {value}")
        return value

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ExperimentConfig":
        if len(self.theta_star) != self.m:
            raise ValueError(f"theta_star has length {len(self.theta_star)}, expected m={self.m}")
        if len(self.theta_bar_0) != self.m + 1:
            raise ValueError(f"theta_bar_0 has length {len(self.theta_bar_0)}, expected m+1={self.m + 1}")
        half = 2.0 ** (self.ell - 1)
        if self.xi_bound >= half:
            raise ValueError(f"xi_bound={self.xi_bound} must be below 2^(ell-1)={half}")
        return self

    @classmethod
    def valid_keys(cls) -> list[str]:
        return [field.alias or name for name, field in cls.model_fields.items()]

    @property
    def grid(self) -> GridSpec:
        return GridSpec.box(self.m, self.xi_bound, self.ell, self.jj)

    def sgld_config(self, seed: int) -> SGLDConfig:
        return SGLDConfig(
            lambda_=self.lambda_,
            beta=self.beta,
            n_iter=self.n_iter,
            seed=seed,
            snap_samples=self.snap_samples,
            record_every=self.record_every,
        )
