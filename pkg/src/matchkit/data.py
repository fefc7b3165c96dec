"""Shared data model: point sets, causal datasets, and estimator configuration.

All containers are immutable after construction (backing numpy arrays are
marked read-only), so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadTreatmentValue,
    DimensionMismatch,
    EmptySample,
    GroupTooSmall,
    InvalidM,
    MalformedInput,
    NonFiniteOutcome,
)


def _as_matrix(points, name: str = "points") -> np.ndarray:
    a = np.asarray(points, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise MalformedInput(f"{name} must be a 1-d or 2-d array, got ndim={a.ndim}")
    return a


@dataclass(frozen=True)
class PointSet:
    """N points in R^d, stored as a read-only (n, d) float64 matrix."""

    points: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.points)
        if a.shape[1] < 1:
            raise DimensionMismatch("dimension d must be >= 1")
        if not np.all(np.isfinite(a)):
            raise MalformedInput("points contain NaN or infinite coordinates")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "points", a)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class CausalDataset:
    """Observations (X_i, D_i, Y_i) with binary treatment bookkeeping."""

    covariates: PointSet
    treatments: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        d_arr = np.asarray(self.treatments)
        y = np.asarray(self.outcomes, dtype=np.float64)
        n = self.covariates.n
        if d_arr.ndim != 1 or y.ndim != 1:
            raise MalformedInput("treatments and outcomes must be 1-d sequences")
        if len(d_arr) != n or len(y) != n:
            raise DimensionMismatch(
                f"covariates ({n}), treatments ({len(d_arr)}) and outcomes "
                f"({len(y)}) must have equal length"
            )
        if not np.all(np.isin(d_arr, (0, 1))):
            bad = d_arr[~np.isin(d_arr, (0, 1))][0]
            raise BadTreatmentValue(f"treatment values must be 0 or 1, got {bad!r}")
        d_arr = np.ascontiguousarray(d_arr, dtype=np.int64)
        y = np.ascontiguousarray(y)
        d_arr.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "treatments", d_arr)
        object.__setattr__(self, "outcomes", y)

    @property
    def n(self) -> int:
        return self.covariates.n

    @property
    def d(self) -> int:
        return self.covariates.d

    @property
    def n1(self) -> int:
        return int(self.treatments.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    def group_indices(self, omega: int) -> np.ndarray:
        """Row indices of units with treatment == omega, in dataset order."""
        return np.flatnonzero(self.treatments == omega)


@dataclass(frozen=True)
class EstimatorConfig:
    """Bundle of tuning knobs passed through the CLI and the service.

    ``m`` wins over ``alpha`` when both are set; ``outcome_degree`` of
    ZERO_MODEL_DEGREE requests the identically-zero outcome model.
    """

    m: int | None = None
    alpha: float = 1.0
    k_folds: int = 2
    seed: int = 0
    outcome_degree: int | None = None
    level: float = field(default=0.95)

    def __post_init__(self):
        if self.m is not None and self.m < 1:
            raise InvalidM(f"m must be >= 1, got {self.m}")
        if self.alpha <= 0:
            raise InvalidM(f"alpha must be > 0, got {self.alpha}")
        if self.k_folds < 2:
            raise MalformedInput(f"k_folds must be >= 2, got {self.k_folds}")
        if self.seed < 0:
            raise MalformedInput(f"seed must be nonnegative, got {self.seed}")
        if not 0.0 < self.level < 1.0:
            raise MalformedInput(f"level must be in (0, 1), got {self.level}")


def validate_two_sample(x: PointSet, z: PointSet, m: int) -> None:
    """Check a two-sample matching call: dims equal, sets nonempty, 1 <= m <= x.n."""
    if x.n == 0 or z.n == 0:
        raise EmptySample("both samples must be nonempty")
    if x.d != z.d:
        raise DimensionMismatch(f"dimension mismatch: x has d={x.d}, z has d={z.d}")
    m = int(m)
    if m < 1:
        raise InvalidM(f"m must be >= 1, got {m}")
    if m > x.n:
        raise InvalidM(f"m={m} exceeds the matched-into sample size N0={x.n}")


def validate_causal(ds: CausalDataset, m: int) -> None:
    """Check an ATE estimation call: both groups of size >= m, outcomes finite."""
    m = int(m)
    if m < 1:
        raise InvalidM(f"m must be >= 1, got {m}")
    n0, n1 = ds.n0, ds.n1
    if n0 < 1 or n1 < 1:
        raise GroupTooSmall(f"both groups must be nonempty (n0={n0}, n1={n1})")
    if n0 < m or n1 < m:
        raise GroupTooSmall(f"m={m} exceeds a group size (n0={n0}, n1={n1})")
    if not np.all(np.isfinite(ds.outcomes)):
        raise NonFiniteOutcome("outcomes contain NaN or infinite values")
