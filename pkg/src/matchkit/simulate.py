"""Data generators with analytic ground truth, the Monte Carlo risk and
coverage harness, and the scaling benchmark.

Reproducibility: every replication draws from its own stream derived via
``SeedSequence(seed, spawn_key=(cell, rep))``, so results are identical
whether replications run serially or on a thread pool; aggregation always
happens in replication order.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .ate import default_outcome_degree, estimate_ate, select_m_ate
from .data import CausalDataset, PointSet
from .divergence import kl_estimate, select_m_kl
from .errors import EmptyRun, MalformedInput, OutsideSupport
from .matching import match_counts_sample, nn_radii_sq
from .ratio import density_ratio_at_sample, select_m_ratio

TWO_SAMPLE_FAMILIES = ("uniform-cube", "uniform-subinterval",
                       "truncated-gaussian-on-cube")


def thread_count() -> int:
    """Worker cap from MATCHKIT_THREADS; defaults to the available cores."""
    env = os.environ.get("MATCHKIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _parallel_map(fn, items):
    workers = thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# polynomials over the unit cube
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Polynomial:
    """Sparse polynomial sum_t coef_t * prod_i x_i^t_i over R^d."""

    d: int
    terms: dict  # exponent tuple -> coefficient

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        out = np.zeros(X.shape[0])
        for exps, coef in self.terms.items():
            out += coef * np.prod(X ** np.asarray(exps), axis=1)
        return out

    def cube_mean(self) -> float:
        """Exact mean over the uniform unit cube: each monomial integrates
        to prod_i 1/(t_i + 1)."""
        total = 0.0
        for exps, coef in self.terms.items():
            total += coef * math.prod(1.0 / (t + 1) for t in exps)
        return total

    @classmethod
    def from_dict(cls, d: int, spec: dict) -> "Polynomial":
        terms = {}
        for key, coef in spec.items():
            exps = tuple(int(p) for p in str(key).split(","))
            if len(exps) != d:
                raise MalformedInput(
                    f"polynomial term {key!r} has {len(exps)} exponents, expected {d}"
                )
            terms[exps] = float(coef)
        return cls(d=d, terms=terms)

    def to_dict(self) -> dict:
        return {",".join(str(t) for t in exps): coef
                for exps, coef in self.terms.items()}


# ---------------------------------------------------------------------------
# two-sample specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoSampleSpec:
    """A (nu0, nu1) pair on the unit cube with analytic ratio and KL.

    Families:
      uniform-cube              nu0 = nu1 = U[0,1]^d
      uniform-subinterval       nu0 = U[0,1]^d, nu1 = U[0,b]^d (param b)
      truncated-gaussian-on-cube  nu0 = U[0,1]^d, nu1 = prod TN(mu, sigma; [0,1])
    """

    family: str
    d: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in TWO_SAMPLE_FAMILIES:
            raise MalformedInput(f"unknown two-sample family {self.family!r}")
        if self.d < 1:
            raise MalformedInput("dimension must be >= 1")
        if self.family == "uniform-subinterval":
            b = float(self.params.get("b", 0.5))
            if not 0.0 < b <= 1.0:
                raise MalformedInput(f"subinterval width b must be in (0, 1], got {b}")
        if self.family == "truncated-gaussian-on-cube":
            sigma = float(self.params.get("sigma", 0.25))
            if sigma <= 0:
                raise MalformedInput(f"sigma must be > 0, got {sigma}")

    # -- sampling ------------------------------------------------------------

    def _tn_consts(self):
        mu = float(self.params.get("mu", 0.5))
        sigma = float(self.params.get("sigma", 0.25))
        a = (0.0 - mu) / sigma
        b = (1.0 - mu) / sigma
        zc = float(ndtr(b) - ndtr(a))
        return mu, sigma, a, b, zc

    def sample(self, rng: np.random.Generator, n: int, which: int) -> np.ndarray:
        if which == 0 or self.family == "uniform-cube":
            return rng.random((n, self.d))
        if self.family == "uniform-subinterval":
            b = float(self.params.get("b", 0.5))
            return rng.random((n, self.d)) * b
        mu, sigma, a, b, _ = self._tn_consts()
        u = rng.uniform(ndtr(a), ndtr(b), size=(n, self.d))
        return mu + sigma * ndtri(u)

    # -- analytic truth --------------------------------------------------------

    def ratio_values(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise OutsideSupport("evaluation point lies outside the nu0 support")
        if self.family == "uniform-cube":
            return np.ones(pts.shape[0])
        if self.family == "uniform-subinterval":
            b = float(self.params.get("b", 0.5))
            inside = np.all(pts <= b, axis=1)
            return np.where(inside, b ** (-self.d), 0.0)
        mu, sigma, _, _, zc = self._tn_consts()
        dens = np.exp(-((pts - mu) ** 2) / (2 * sigma * sigma)) / (
            sigma * zc * math.sqrt(2 * math.pi)
        )
        return np.prod(dens, axis=1)

    def analytic_kl(self) -> float:
        """KL(nu1 || nu0) in nats."""
        if self.family == "uniform-cube":
            return 0.0
        if self.family == "uniform-subinterval":
            b = float(self.params.get("b", 0.5))
            return self.d * math.log(1.0 / b)
        mu, sigma, a, b, zc = self._tn_consts()
        # per-dimension: integral of g*ln(g) for the truncated normal
        phi_a = math.exp(-a * a / 2) / math.sqrt(2 * math.pi)
        phi_b = math.exp(-b * b / 2) / math.sqrt(2 * math.pi)
        second_moment = 1.0 + (a * phi_a - b * phi_b) / zc
        per_dim = -math.log(sigma * zc * math.sqrt(2 * math.pi)) - second_moment / 2.0
        return self.d * per_dim

    @classmethod
    def from_dict(cls, spec: dict) -> "TwoSampleSpec":
        return cls(family=spec["family"], d=int(spec.get("d", 1)),
                   params=dict(spec.get("params", {})))

    def to_dict(self) -> dict:
        return {"family": self.family, "d": self.d, "params": dict(self.params)}


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def generate_two_sample(spec: TwoSampleSpec, n0: int, n1: int,
                        seed) -> tuple[PointSet, PointSet]:
    """Reproducible draws: the same (spec, n0, n1, seed) gives identical bytes."""
    rng = np.random.default_rng(_as_seedseq(seed))
    x = spec.sample(rng, n0, 0)
    z = spec.sample(rng, n1, 1)
    return PointSet(x), PointSet(z)


def true_ratio(spec: TwoSampleSpec, p) -> float:
    """Analytic density ratio at a single point of the nu0 support."""
    return float(spec.ratio_values(np.asarray(p, dtype=np.float64).reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# causal specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CausalSpec:
    """Covariates uniform on the unit cube, linear propensity with range
    inside [0.2, 0.8], polynomial outcome means, Gaussian noise."""

    d: int
    propensity_intercept: float
    propensity_slopes: tuple
    mu0: Polynomial
    mu1: Polynomial
    noise_sigma: float

    def __post_init__(self):
        slopes = tuple(float(s) for s in self.propensity_slopes)
        if len(slopes) != self.d:
            raise MalformedInput(
                f"propensity needs {self.d} slopes, got {len(slopes)}"
            )
        object.__setattr__(self, "propensity_slopes", slopes)
        e_min = self.propensity_intercept + sum(min(0.0, s) for s in slopes)
        e_max = self.propensity_intercept + sum(max(0.0, s) for s in slopes)
        if e_min < 0.2 - 1e-12 or e_max > 0.8 + 1e-12:
            raise MalformedInput(
                f"propensity range [{e_min:.3f}, {e_max:.3f}] must lie in [0.2, 0.8]"
            )
        if self.noise_sigma < 0:
            raise MalformedInput("noise sigma must be >= 0")

    def propensity(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        return self.propensity_intercept + X @ np.asarray(self.propensity_slopes)

    def true_tau(self) -> float:
        diff = Polynomial(self.d, {
            exps: self.mu1.terms.get(exps, 0.0) - self.mu0.terms.get(exps, 0.0)
            for exps in set(self.mu0.terms) | set(self.mu1.terms)
        })
        return diff.cube_mean()

    @classmethod
    def from_dict(cls, spec: dict) -> "CausalSpec":
        d = int(spec["d"])
        prop = spec.get("propensity", {})
        return cls(
            d=d,
            propensity_intercept=float(prop.get("intercept", 0.5)),
            propensity_slopes=tuple(prop.get("slopes", [0.0] * d)),
            mu0=Polynomial.from_dict(d, spec.get("mu0", {})),
            mu1=Polynomial.from_dict(d, spec.get("mu1", {})),
            noise_sigma=float(spec.get("noise_sigma", 1.0)),
        )

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "propensity": {"intercept": self.propensity_intercept,
                           "slopes": list(self.propensity_slopes)},
            "mu0": self.mu0.to_dict(),
            "mu1": self.mu1.to_dict(),
            "noise_sigma": self.noise_sigma,
        }


def generate_causal(spec: CausalSpec, n: int, seed) -> CausalDataset:
    """X ~ U[0,1]^d, D ~ Bernoulli(e(X)), Y = mu_D(X) + sigma * N(0,1)."""
    rng = np.random.default_rng(_as_seedseq(seed))
    x = rng.random((n, spec.d))
    e = spec.propensity(x)
    treat = (rng.random(n) < e).astype(np.int64)
    noise = rng.standard_normal(n) * spec.noise_sigma
    y = np.where(treat == 1, spec.mu1.evaluate(x), spec.mu0.evaluate(x)) + noise
    return CausalDataset(covariates=PointSet(x), treatments=treat, outcomes=y)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RiskReport:
    task: str
    metric: str
    cells: list
    slope: float | None
    slope_se: float | None
    truth: float | None = None

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "metric": self.metric,
            "truth": self.truth,
            "cells": self.cells,
            "slope": self.slope,
            "slope_se": self.slope_se,
        }


def _ols_loglog(ns, values):
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ns) < 2 or np.any(values <= 0):
        return None, None
    lx = np.log(ns)
    ly = np.log(values)
    design = np.column_stack([np.ones_like(lx), lx])
    coef, _, _, _ = np.linalg.lstsq(design, ly, rcond=None)
    slope = float(coef[1])
    resid = ly - design @ coef
    dof = len(ns) - 2
    if dof <= 0:
        return slope, None
    sxx = float(((lx - lx.mean()) ** 2).sum())
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, se


def _check_reps(reps: int) -> None:
    if reps < 1:
        raise EmptyRun("the replication count must be >= 1")


# ---------------------------------------------------------------------------
# Monte Carlo harness
# ---------------------------------------------------------------------------

def mc_pointwise_risk(spec: TwoSampleSpec, eval_point, n_grid, reps: int,
                      alpha: float, seed: int) -> RiskReport:
    """MSE of the ratio estimate at one interior point over a size ladder,
    with M from the ratio selection rule, plus the fitted log-log slope."""
    _check_reps(reps)
    p = np.asarray(eval_point, dtype=np.float64).reshape(-1)
    r_true = true_ratio(spec, p)
    cells = []
    for cell, n in enumerate(n_grid):
        m = select_m_ratio(n, n, spec.d, alpha)

        def one(rep, n=n, m=m):
            rng_seed = np.random.SeedSequence(seed, spawn_key=(cell, rep))
            rng = np.random.default_rng(rng_seed)
            x = spec.sample(rng, n, 0)
            z = spec.sample(rng, n, 1)
            r2 = nn_radii_sq(x, z, m)
            d2p = ((z - p) ** 2).sum(axis=1)
            k = int((d2p <= r2).sum())
            rhat = k / m  # N0 = N1 here, so the N0/N1 factor is one
            return (rhat - r_true) ** 2

        errs = np.asarray(_parallel_map(one, list(range(reps))))
        cells.append({
            "n": int(n), "m": int(m), "reps": int(reps),
            "value": float(errs.mean()),
            "se": float(errs.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
        })
    slope, slope_se = _ols_loglog([c["n"] for c in cells],
                                  [c["value"] for c in cells])
    return RiskReport(task="pw-risk", metric="mse", cells=cells,
                      slope=slope, slope_se=slope_se, truth=r_true)


def mc_l1_risk(spec: TwoSampleSpec, n_grid, reps: int, alpha: float,
               seed: int) -> RiskReport:
    """Global L1 risk approximated by averaging |rhat - r| over the X sample
    points themselves (an f0-weighted quadrature)."""
    _check_reps(reps)
    cells = []
    for cell, n in enumerate(n_grid):
        m = select_m_ratio(n, n, spec.d, alpha)

        def one(rep, n=n, m=m):
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(cell, rep)))
            x = spec.sample(rng, n, 0)
            z = spec.sample(rng, n, 1)
            est = density_ratio_at_sample(PointSet(x), PointSet(z), m)
            return float(np.mean(np.abs(est.values - spec.ratio_values(x))))

        risks = np.asarray(_parallel_map(one, list(range(reps))))
        cells.append({
            "n": int(n), "m": int(m), "reps": int(reps),
            "value": float(risks.mean()),
            "se": float(risks.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
        })
    slope, slope_se = _ols_loglog([c["n"] for c in cells],
                                  [c["value"] for c in cells])
    return RiskReport(task="l1-risk", metric="l1", cells=cells,
                      slope=slope, slope_se=slope_se)


def mc_kl_bias(spec: TwoSampleSpec, n_grid, reps: int, alpha: float,
               seed: int) -> RiskReport:
    """Bias and MSE of the plug-in KL estimate against the analytic value,
    with M from the KL selection rule."""
    _check_reps(reps)
    truth = spec.analytic_kl()
    cells = []
    for cell, n in enumerate(n_grid):
        m = select_m_kl(n, n, spec.d, alpha)

        def one(rep, n=n, m=m):
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(cell, rep)))
            x = spec.sample(rng, n, 0)
            z = spec.sample(rng, n, 1)
            return kl_estimate(PointSet(x), PointSet(z), m).value

        vals = np.asarray(_parallel_map(one, list(range(reps))))
        cells.append({
            "n": int(n), "m": int(m), "reps": int(reps),
            "mean_estimate": float(vals.mean()),
            "bias": float(vals.mean() - truth),
            "mse": float(((vals - truth) ** 2).mean()),
        })
    return RiskReport(task="kl-bias", metric="kl", cells=cells,
                      slope=None, slope_se=None, truth=truth)


def mc_ate_coverage(spec: CausalSpec, n: int, reps: int, method: str,
                    seed: int, alpha: float = 1.0, degree: int | None = None,
                    folds: int = 2) -> dict:
    """Coverage of the 95% interval, mean bias, and the ratio of the
    empirical to the mean estimated standard deviation."""
    _check_reps(reps)
    if method not in ("bc", "crossfit"):
        raise MalformedInput(
            f"coverage needs an interval-producing method, got {method!r}"
        )
    tau = spec.true_tau()
    m = select_m_ate(n, spec.d, alpha)
    if degree is None:
        degree = default_outcome_degree(spec.d)

    def one(rep):
        ds = generate_causal(spec, n,
                             np.random.SeedSequence(seed, spawn_key=(0, rep)))
        est = estimate_ate(ds, method=method,
                           m=min(m, ds.n0, ds.n1), degree=degree, folds=folds,
                           seed=(seed * 1_000_003 + rep) % (2 ** 31))
        covered = est.ci_low <= tau <= est.ci_high
        sd_hat = math.sqrt(est.sigma2_hat / ds.n)
        return est.tau_hat, covered, sd_hat

    rows = _parallel_map(one, list(range(reps)))
    taus = np.asarray([r[0] for r in rows])
    covered = np.asarray([r[1] for r in rows])
    sds = np.asarray([r[2] for r in rows])
    return {
        "task": "coverage",
        "method": method,
        "n": int(n),
        "m": int(m),
        "degree": int(degree),
        "folds": int(folds),
        "reps": int(reps),
        "true_tau": float(tau),
        "coverage": float(covered.mean()),
        "mean_bias": float(taus.mean() - tau),
        "mean_sd_hat": float(sds.mean()),
        "sd_ratio": float(taus.std(ddof=1) / sds.mean()) if reps > 1 and sds.mean() > 0 else None,
    }


def bench_scaling(n_grid, d: int, m_rule, seed: int) -> dict:
    """Wall time of the sample-point matching path (index build + M-NN
    search + occurrence counting) per grid size, with doubling ratios."""
    rows = []
    rule, value = m_rule
    warm = False
    for cell, n in enumerate(n_grid):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(cell,)))
        x = PointSet(rng.random((int(n), d)))
        z = PointSet(rng.random((int(n), d)))
        if rule == "fixed":
            m = int(value)
        elif rule == "ratio":
            m = select_m_ratio(int(n), int(n), d, float(value))
        else:
            raise MalformedInput(f"unknown m rule {rule!r}")
        if not warm:
            match_counts_sample(x, z, min(m, x.n), method="kdtree")
            warm = True
        t0 = time.perf_counter()
        match_counts_sample(x, z, min(m, x.n), method="kdtree")
        dt = time.perf_counter() - t0
        rows.append({"n": int(n), "m": int(min(m, x.n)), "seconds": float(dt)})
    ratios = []
    for prev, cur in zip(rows, rows[1:]):
        if cur["n"] == 2 * prev["n"] and prev["seconds"] > 0:
            ratios.append(float(cur["seconds"] / prev["seconds"]))
    return {"task": "bench", "d": int(d), "m_rule": {"rule": rule, "value": value},
            "rows": rows, "ratios": ratios}
