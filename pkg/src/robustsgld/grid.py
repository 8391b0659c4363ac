"""Dyadic grids, coordinate snapping and discretised reference measures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Guardrail against the 2^{m(ell+jj)} blow-up of a full enumeration.
DEFAULT_MAX_POINTS = 10**8


class GridError(ValueError):
    """Base exception for grid construction and snapping errors."""


class GridDomainError(GridError):
    """Raised when a sample lies outside the dyadic box of the grid."""


class GridResourceError(GridError):
    """Raised when an enumeration would exceed the configured point cap."""


class GridSpec(BaseModel):
    """The dyadic grid 2^{-jj}Z^m restricted to a box Xi inside [-2^{ell-1}, 2^{ell-1})^m."""

    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1, description="Data dimension")
    ell: int = Field(ge=1, le=60, description="Half-extent exponent, the box is [-2^(ell-1), 2^(ell-1))")
    jj: int = Field(ge=1, le=60, description="Mesh exponent, mesh = 2^-jj")
    xi_box: tuple[tuple[float, float], ...] = Field(description="Per-axis (lo, hi) bounds of Xi")

    @model_validator(mode="after")
    def _check_box(self) -> "GridSpec":
        if len(self.xi_box) != self.m:
            raise ValueError(f"xi_box has {len(self.xi_box)} axes, expected m={self.m}")
        half = self.half_extent
        for axis, (lo, hi) in enumerate(self.xi_box):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"xi_box axis {axis} is not finite: ({lo}, {hi})")
            if lo > hi:
                raise ValueError(f"xi_box axis {axis} has lo > hi: ({lo}, {hi})")
            if lo < -half or hi >= half:
                raise ValueError(
                    f"xi_box axis {axis} ({lo}, {hi}) is not inside [-{half}, {half}) for ell={self.ell}"
                )
        return self

    @classmethod
    def box(cls, m: int, bound: float, ell: int, jj: int) -> "GridSpec":
        """Grid over the symmetric box [-bound, bound]^m."""
        return cls(m=m, ell=ell, jj=jj, xi_box=tuple((-bound, bound) for _ in range(m)))

    @property
    def half_extent(self) -> float:
        return 2.0 ** (self.ell - 1)

    @property
    def mesh(self) -> float:
        return 2.0 ** (-self.jj)

    @property
    def full_count(self) -> int:
        return 2 ** (self.m * (self.ell + self.jj))

    @property
    def lo(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.xi_box], dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.array([hi for _, hi in self.xi_box], dtype=float)

    @property
    def m_xi(self) -> float:
        """Largest Euclidean norm over the corners of Xi."""
        return float(np.sqrt(np.sum(np.maximum(self.lo**2, self.hi**2))))

    def axis_values(self) -> list[np.ndarray]:
        """Grid coordinates inside Xi, per axis, in increasing order."""
        scale = 2.0**self.jj
        values = []
        for lo, hi in self.xi_box:
            k_lo = math.ceil(lo * scale)
            k_hi = math.floor(hi * scale)
            values.append(np.arange(k_lo, k_hi + 1, dtype=float) / scale)
        return values

    def count(self) -> int:
        return math.prod(len(values) for values in self.axis_values())


def smallest_ell(lo: Sequence[float], hi: Sequence[float]) -> int:
    """Smallest ell >= 1 such that the box [lo, hi] fits in [-2^{ell-1}, 2^{ell-1})^m."""
    ell = 1
    while any(l < -(2.0 ** (ell - 1)) or h >= 2.0 ** (ell - 1) for l, h in zip(lo, hi)):
        ell += 1
    return ell


def snap(x: np.ndarray | Sequence[float], jj: int) -> np.ndarray:
    """Round every coordinate down to the dyadic mesh 2^-jj.

    Works on a single point or on an array of points (rows). Scaling by a power
    of two is exact, so the result is the exact floor on the mesh.

    Raises:
        GridError: If any coordinate is not finite.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise GridError("Cannot snap non-finite coordinates")
    scale = 2.0**jj
    return np.floor(arr * scale) / scale


def enumerate_points(spec: GridSpec, max_points: int = DEFAULT_MAX_POINTS) -> np.ndarray:
    """All grid points inside Xi as an (N, m) array in lexicographic order.

    Raises:
        GridResourceError: If N would exceed ``max_points``.
    """
    axes = spec.axis_values()
    count = math.prod(len(values) for values in axes)
    if count > max_points:
        raise GridResourceError(
            f"Grid has {count} points which exceeds the cap max_points={max_points}"
        )
    if count == 0:
        return np.empty((0, spec.m), dtype=float)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([axis.reshape(-1) for axis in mesh], axis=1)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure, one mass per row of ``points``."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self) -> None:
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if points.shape[0] != masses.shape[0]:
            raise ValueError(
                f"{points.shape[0]} points but {masses.shape[0]} masses"
            )
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ValueError("Masses must be finite and nonnegative")
        if abs(float(masses.sum()) - 1.0) > 1e-12:
            raise ValueError(f"Masses sum to {masses.sum()!r}, expected 1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "masses", masses)

    @property
    def size(self) -> int:
        return int(self.masses.shape[0])

    def check_on(self, spec: GridSpec) -> None:
        """Raise GridDomainError unless every atom sits on the grid box of ``spec``."""
        half = spec.half_extent
        if self.points.shape[1] != spec.m:
            raise GridDomainError(f"Measure has dimension {self.points.shape[1]}, expected {spec.m}")
        if np.any(self.points < -half) or np.any(self.points >= half):
            raise GridDomainError(f"Measure has atoms outside [-{half}, {half})^{spec.m}")
        if not np.array_equal(snap(self.points, spec.jj), self.points):
            raise GridDomainError(f"Measure has atoms off the mesh 2^-{spec.jj}")


def discretise_measure(
    samples: np.ndarray | Sequence[Sequence[float]] | DiscreteMeasure,
    spec: GridSpec,
) -> DiscreteMeasure:
    """Push a measure onto the grid: each cell's mass goes to its lower corner.

    ``samples`` is either an (n, m) array of equally weighted samples or a
    DiscreteMeasure. The output support is sorted lexicographically, so the
    result does not depend on sample order.

    Raises:
        GridDomainError: If a sample lies outside [-2^{ell-1}, 2^{ell-1})^m.
    """
    if isinstance(samples, DiscreteMeasure):
        points, weights = samples.points, samples.masses
    else:
        points = np.atleast_2d(np.asarray(samples, dtype=float))
        weights = None
        if points.size == 0:
            raise GridDomainError("Cannot discretise an empty sample")

    if points.shape[1] != spec.m:
        raise GridDomainError(f"Samples have dimension {points.shape[1]}, expected {spec.m}")
    if not np.all(np.isfinite(points)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(points), axis=1))[0])
        raise GridDomainError(f"Sample {bad} is not finite: {points[bad].tolist()}")
    half = spec.half_extent
    outside = np.any((points < -half) | (points >= half), axis=1)
    if np.any(outside):
        bad = int(np.flatnonzero(outside)[0])
        raise GridDomainError(
            f"Sample {bad} at {points[bad].tolist()} lies outside [-{half}, {half})^{spec.m}"
        )

    snapped = snap(points, spec.jj)
    support, inverse = np.unique(snapped, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    if weights is None:
        # Integer counts keep the masses independent of sample order.
        masses = np.bincount(inverse, minlength=support.shape[0]) / points.shape[0]
    else:
        masses = np.bincount(inverse, weights=weights, minlength=support.shape[0])
        masses = masses / masses.sum()
    return DiscreteMeasure(points=support, masses=masses)
