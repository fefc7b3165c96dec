"""Plug-in KL divergence estimation from the matching-based density ratio."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PointSet
from .errors import NegativeInput
from .ratio import _round_half_up, density_ratio_at_sample


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    m: int
    n0: int
    n1: int


def phi(t):
    """t * ln(t) with phi(0) = 0; scalar in, scalar out."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0):
        raise NegativeInput("phi is defined on nonnegative inputs only")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(arr > 0, arr * np.log(np.where(arr > 0, arr, 1.0)), 0.0)
    if np.isscalar(t) or arr.ndim == 0:
        return float(out)
    return out


def kl_estimate(x: PointSet, z: PointSet, m: int,
                method: str = "auto") -> DivergenceEstimate:
    """Mean of phi over the ratio estimates at the sample points (nats)."""
    est = density_ratio_at_sample(x, z, m, method=method)
    value = float(np.mean(phi(est.values)))
    return DivergenceEstimate(value=value, m=est.m, n0=est.n0, n1=est.n1)


def select_m_kl(n0: int, n1: int, d: int, alpha: float = 1.0) -> int:
    """Number of matches for KL estimation:
    round(alpha * max(N0^(1/(1+d)), N0 * N1^(-d/(1+d)))), clamped to [1, N0]."""
    v = alpha * max(n0 ** (1.0 / (1 + d)), n0 * n1 ** (-d / (1.0 + d)))
    return min(max(_round_half_up(v), 1), n0)
