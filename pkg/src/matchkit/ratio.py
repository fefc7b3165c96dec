"""One-step density-ratio estimation from match counts, M-selection rules,
and the two nearest-neighbor baselines used for comparison.

The core estimator at a point is (N0/N1) * K_M / M; its mean over the
sample points is exactly one because the match counts sum to N1 * M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import PointSet, validate_two_sample
from .errors import DimensionMismatch, InvalidM
from .matching import match_counts_extended, match_counts_sample, nn_radii_sq, nn_sets


@dataclass(frozen=True)
class RatioEstimate:
    """Estimated density ratio at a set of evaluation points."""

    values: np.ndarray
    m: int
    n0: int
    n1: int
    eval_kind: str  # "sample-points" or "new-points"

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def select_m_ratio(n0: int, n1: int, d: int, alpha: float = 1.0) -> int:
    """Rate-optimal number of matches for ratio estimation:
    round(alpha * max(N0^(2/(2+d)), N0 * N1^(-d/(2+d)))), clamped to [1, N0]."""
    v = alpha * max(n0 ** (2.0 / (2 + d)), n0 * n1 ** (-d / (2.0 + d)))
    return min(max(_round_half_up(v), 1), n0)


def density_ratio_at_sample(x: PointSet, z: PointSet, m: int,
                            method: str = "auto") -> RatioEstimate:
    """r-hat at the sample points X_i (match counting at sample points)."""
    mc = match_counts_sample(x, z, m, method=method)
    values = (x.n / z.n) * (mc.counts / mc.m)
    return RatioEstimate(values=values, m=mc.m, n0=x.n, n1=z.n,
                         eval_kind="sample-points")


def density_ratio_at_points(x: PointSet, z: PointSet, m: int, pts: PointSet,
                            method: str = "auto") -> tuple[RatioEstimate, RatioEstimate]:
    """r-hat at new points and at the sample points, from one matching pass."""
    k_x, k_new = match_counts_extended(x, z, m, pts, method=method)
    scale = x.n / z.n
    at_points = RatioEstimate(values=scale * (k_new.counts / k_new.m),
                              m=k_new.m, n0=x.n, n1=z.n, eval_kind="new-points")
    at_sample = RatioEstimate(values=scale * (k_x.counts / k_x.m),
                              m=k_x.m, n0=x.n, n1=z.n, eval_kind="sample-points")
    return at_points, at_sample


def two_step_ratio(x: PointSet, z: PointSet, m: int, pts: PointSet,
                   method: str = "auto") -> RatioEstimate:
    """Baseline: ratio of two M-NN density estimates f1-hat / f0-hat with
    f-hat(p) = m / (N * V_d * R_m(p)^d). Both radii zero maps to 0."""
    m = int(m)
    if m < 1 or m > min(x.n, z.n):
        raise InvalidM(f"two-step baseline needs 1 <= m <= min(N0, N1), got {m}")
    if x.d != z.d or pts.d != x.d:
        raise DimensionMismatch("samples and evaluation points must share d")
    d = x.d
    r0d = nn_radii_sq(x.points, pts.points, m, method=method) ** (d / 2.0)
    r1d = nn_radii_sq(z.points, pts.points, m, method=method) ** (d / 2.0)
    v_d = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        f1 = m / (z.n * v_d * r1d)
        f0 = m / (x.n * v_d * r0d)
        values = f1 / f0
    values = np.where(np.isnan(values), 0.0, values)
    return RatioEstimate(values=values, m=m, n0=x.n, n1=z.n, eval_kind="new-points")


def noshad_ratio(x: PointSet, z: PointSet, m: int, pts: PointSet,
                 method: str = "auto") -> RatioEstimate:
    """Baseline: pooled-neighbor one-step estimator
    (N0/N1) * M_i / (N_i + 1) from the M NNs of each point in the pooled sample."""
    m = int(m)
    if m < 1 or m > x.n + z.n:
        raise InvalidM(f"pooled baseline needs 1 <= m <= N0 + N1, got {m}")
    if x.d != z.d or pts.d != x.d:
        raise DimensionMismatch("samples and evaluation points must share d")
    pooled = np.vstack([x.points, z.points])
    sets = nn_sets(pooled, pts.points, m, method="auto" if method == "sorted1d" else method)
    from_z = (sets >= x.n).sum(axis=1)
    from_x = m - from_z
    values = (x.n / z.n) * (from_z / (from_x + 1.0))
    return RatioEstimate(values=values, m=m, n0=x.n, n1=z.n, eval_kind="new-points")
