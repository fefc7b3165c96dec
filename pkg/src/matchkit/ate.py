"""Average-treatment-effect estimation via nearest-neighbor matching.

Implements the matching estimator (weighting and imputation forms), the
bias-corrected estimator with polynomial outcome models, the generic doubly
robust form, K-fold cross-fitting, and the semiparametric variance estimator
with normal-quantile confidence intervals.

The two algebraic forms of each matching estimator are always computed and
cross-checked; a disagreement beyond 1e-10 raises, since it can only come
from an implementation fault.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from scipy.special import ndtri

from .data import CausalDataset, PointSet, validate_causal
from .errors import (
    FoldTooSmall,
    GroupTooSmall,
    InternalInconsistency,
    MalformedInput,
    PropensityOutOfRange,
)
from .matching import match_counts_extended, nn_sets
from .ratio import _round_half_up

Z975 = 1.959964  # fixed normal quantile used for the default 95% interval
FORM_TOL = 1e-10
ZERO_MODEL_DEGREE = -1


# ---------------------------------------------------------------------------
# outcome models
# ---------------------------------------------------------------------------

def monomial_exponents(d: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """Exponent tuples of all monomials in d variables up to total degree."""
    out = []
    for total in range(degree + 1):
        for combo in combinations_with_replacement(range(d), total):
            exps = [0] * d
            for dim in combo:
                exps[dim] += 1
            out.append(tuple(exps))
    return tuple(out)


def _design_matrix(X: np.ndarray, exponents) -> np.ndarray:
    cols = [np.prod(X ** np.asarray(e), axis=1) for e in exponents]
    return np.column_stack(cols)


@dataclass(frozen=True)
class OutcomeModel:
    """Polynomial least-squares fit of the outcome within one group,
    or the identically-zero model (degree ZERO_MODEL_DEGREE)."""

    degree: int
    exponents: tuple[tuple[int, ...], ...]
    coef: np.ndarray
    rank_deficient: bool = False

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if self.degree == ZERO_MODEL_DEGREE:
            return np.zeros(X.shape[0])
        return _design_matrix(X, self.exponents) @ self.coef


def zero_model(d: int) -> OutcomeModel:
    return OutcomeModel(degree=ZERO_MODEL_DEGREE, exponents=(),
                        coef=np.empty(0))


def default_outcome_degree(d: int) -> int:
    """Default polynomial order: floor(d/2) + 1, capped at 3."""
    return min(d // 2 + 1, 3)


def fit_outcome_model(ds: CausalDataset, omega: int, degree: int) -> OutcomeModel:
    """Least-squares polynomial fit of Y on covariate monomials within group
    omega. Degree 0 is the group mean; ZERO_MODEL_DEGREE returns mu == 0.
    Rank-deficient designs fall back to the pseudo-inverse solution and are
    flagged."""
    if degree == ZERO_MODEL_DEGREE:
        return zero_model(ds.d)
    if degree < 0:
        raise MalformedInput(f"degree must be >= 0 or the zero sentinel, got {degree}")
    idx = ds.group_indices(omega)
    exponents = monomial_exponents(ds.d, degree)
    if len(idx) <= len(exponents):
        raise GroupTooSmall(
            f"group {omega} has {len(idx)} units, need more than "
            f"{len(exponents)} for a degree-{degree} fit"
        )
    design = _design_matrix(ds.covariates.points[idx], exponents)
    coef, _, rank, _ = np.linalg.lstsq(design, ds.outcomes[idx], rcond=None)
    return OutcomeModel(degree=degree, exponents=exponents, coef=coef,
                        rank_deficient=rank < len(exponents))


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AteEstimate:
    tau_hat: float
    method: str
    m: int | None = None
    sigma2_hat: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    k_folds: int | None = None
    diagnostics: dict = field(default_factory=dict)


def _z_quantile(level: float) -> float:
    if abs(level - 0.95) < 1e-12:
        return Z975
    return float(ndtri(0.5 + level / 2.0))


def _group_matching(ds: CausalDataset, m: int, method: str):
    """M-NN sets and match counts in both directions, with the exact
    integer weight-sum identities asserted before any division."""
    xv = ds.covariates.points
    idx_t = ds.group_indices(1)
    idx_c = ds.group_indices(0)
    sets1 = nn_sets(xv[idx_t], xv[idx_c], m, method=method)  # controls -> treated
    sets0 = nn_sets(xv[idx_c], xv[idx_t], m, method=method)  # treated -> controls
    k1 = np.bincount(sets1.ravel(), minlength=len(idx_t))
    k0 = np.bincount(sets0.ravel(), minlength=len(idx_c))
    if int(k1.sum()) != len(idx_c) * m or int(k0.sum()) != len(idx_t) * m:
        raise InternalInconsistency("match-count sum identity violated")
    return idx_t, idx_c, sets1, sets0, k1, k0


def _diagnostics(k0: np.ndarray, k1: np.ndarray, m: int) -> dict:
    w1 = 1.0 + k1 / m
    w0 = 1.0 + k0 / m
    return {
        "treated": {"max_weight": float(w1.max()), "mean_weight": float(w1.mean())},
        "control": {"max_weight": float(w0.max()), "mean_weight": float(w0.mean())},
    }


def ate_matching(ds: CausalDataset, m: int, method: str = "auto") -> AteEstimate:
    """Matching estimator: weighting form (1 + K/M) and imputation form,
    cross-checked. No variance is attached (with implicit zero outcome
    models the plug-in variance estimator need not be consistent)."""
    m = int(m)
    validate_causal(ds, m)
    idx_t, idx_c, sets1, sets0, k1, k0 = _group_matching(ds, m, method)
    y = ds.outcomes
    n = ds.n
    w1 = 1.0 + k1 / m
    w0 = 1.0 + k0 / m
    tau_w = (np.dot(w1, y[idx_t]) - np.dot(w0, y[idx_c])) / n

    # imputation form: average of imputed individual contrasts
    y_t = y[idx_t]
    y_c = y[idx_c]
    yhat1 = np.empty(n)
    yhat0 = np.empty(n)
    yhat1[idx_t] = y_t
    yhat0[idx_c] = y_c
    yhat1[idx_c] = y_t[sets1].mean(axis=1)
    yhat0[idx_t] = y_c[sets0].mean(axis=1)
    tau_i = float(np.mean(yhat1 - yhat0))
    if abs(tau_w - tau_i) > FORM_TOL:
        raise InternalInconsistency(
            f"matching estimator forms disagree: {tau_w!r} vs {tau_i!r}"
        )
    return AteEstimate(tau_hat=float(tau_w), method="matching", m=m,
                       diagnostics=_diagnostics(k0, k1, m))


def ate_bias_corrected(ds: CausalDataset, m: int, mu0: OutcomeModel,
                       mu1: OutcomeModel, method: str = "auto") -> AteEstimate:
    """Bias-corrected matching estimator: regression estimate plus matching-
    weighted residuals; the residual-imputation form is cross-checked."""
    m = int(m)
    validate_causal(ds, m)
    idx_t, idx_c, sets1, sets0, k1, k0 = _group_matching(ds, m, method)
    xv = ds.covariates.points
    y = ds.outcomes
    n = ds.n
    mu1_all = mu1.predict(xv)
    mu0_all = mu0.predict(xv)
    resid = np.where(ds.treatments == 1, y - mu1_all, y - mu0_all)
    tau_reg = float(np.mean(mu1_all - mu0_all))
    w1 = 1.0 + k1 / m
    w0 = 1.0 + k0 / m
    tau_w = tau_reg + (np.dot(w1, resid[idx_t]) - np.dot(w0, resid[idx_c])) / n

    # imputation form: impute with regression-adjusted matched outcomes
    y_t, y_c = y[idx_t], y[idx_c]
    mu1_t, mu0_c = mu1_all[idx_t], mu0_all[idx_c]
    yhat1 = np.empty(n)
    yhat0 = np.empty(n)
    yhat1[idx_t] = y_t
    yhat0[idx_c] = y_c
    yhat1[idx_c] = (y_t[sets1] - mu1_t[sets1]).mean(axis=1) + mu1_all[idx_c]
    yhat0[idx_t] = (y_c[sets0] - mu0_c[sets0]).mean(axis=1) + mu0_all[idx_t]
    tau_i = float(np.mean(yhat1 - yhat0))
    if abs(tau_w - tau_i) > FORM_TOL:
        raise InternalInconsistency(
            f"bias-corrected estimator forms disagree: {tau_w!r} vs {tau_i!r}"
        )
    diags = _diagnostics(k0, k1, m)
    diags["rank_deficient"] = bool(mu0.rank_deficient or mu1.rank_deficient)
    return AteEstimate(tau_hat=float(tau_w), method="bias-corrected", m=m,
                       diagnostics=diags)


def ate_doubly_robust(ds: CausalDataset, e_hat, mu0: OutcomeModel,
                      mu1: OutcomeModel) -> AteEstimate:
    """Generic doubly robust estimator with externally supplied propensities."""
    validate_causal(ds, 1)
    e = np.asarray(e_hat, dtype=np.float64)
    if e.shape != (ds.n,):
        raise MalformedInput(f"e_hat must have shape ({ds.n},), got {e.shape}")
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise PropensityOutOfRange("propensities must lie strictly inside (0, 1)")
    xv = ds.covariates.points
    y = ds.outcomes
    mu1_all = mu1.predict(xv)
    mu0_all = mu0.predict(xv)
    resid = np.where(ds.treatments == 1, y - mu1_all, y - mu0_all)
    tau_reg = float(np.mean(mu1_all - mu0_all))
    t_mask = ds.treatments == 1
    adj = (resid[t_mask] / e[t_mask]).sum() - (resid[~t_mask] / (1.0 - e[~t_mask])).sum()
    return AteEstimate(tau_hat=tau_reg + float(adj) / ds.n, method="doubly-robust")


def _variance_given(ds, idx_t, idx_c, k1, k0, m, mu0, mu1, tau_bc, level):
    xv = ds.covariates.points
    y = ds.outcomes
    mu1_all = mu1.predict(xv)
    mu0_all = mu0.predict(xv)
    resid = np.where(ds.treatments == 1, y - mu1_all, y - mu0_all)
    w = np.zeros(ds.n)
    w[idx_t] = 1.0 + k1 / m
    w[idx_c] = -(1.0 + k0 / m)
    terms = mu1_all - mu0_all + w * resid - tau_bc
    sigma2 = float(np.mean(terms ** 2))
    half = _z_quantile(level) * np.sqrt(sigma2 / ds.n)
    return sigma2, (tau_bc - half, tau_bc + half)


def variance_estimate(ds: CausalDataset, m: int, mu0: OutcomeModel,
                      mu1: OutcomeModel, tau_bc: float, level: float = 0.95,
                      method: str = "auto") -> tuple[float, tuple[float, float]]:
    """Semiparametric variance estimator and the normal-quantile interval
    tau_bc +/- z * sqrt(sigma2 / n)."""
    m = int(m)
    validate_causal(ds, m)
    idx_t, idx_c, _, _, k1, k0 = _group_matching(ds, m, method)
    return _variance_given(ds, idx_t, idx_c, k1, k0, m, mu0, mu1, tau_bc, level)


def select_m_ate(n: int, d: int, alpha: float = 1.0) -> int:
    """Number of matches for ATE estimation: round(alpha * n^(2/(2+d))),
    at least 1 (call sites additionally cap at min(n0, n1))."""
    return max(_round_half_up(alpha * n ** (2.0 / (2 + d))), 1)


# ---------------------------------------------------------------------------
# cross-fitting
# ---------------------------------------------------------------------------

def _fold_partition(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Random partition into k folds; the first n % k folds get one extra."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perm = rng.permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(perm[start:start + size]))
        start += size
    return folds


def _subset(ds: CausalDataset, idx: np.ndarray) -> CausalDataset:
    return CausalDataset(
        covariates=PointSet(ds.covariates.points[idx]),
        treatments=ds.treatments[idx],
        outcomes=ds.outcomes[idx],
    )


def ate_cross_fit(ds: CausalDataset, m: int, k: int, degree: int, seed: int,
                  method: str = "auto", level: float = 0.95) -> AteEstimate:
    """K-fold cross-fitted bias-corrected estimator: for in-fold units both
    the match counts and the outcome models come from out-of-fold data; the
    fold estimates are averaged. The variance reuses the full-sample match
    counts and models with the cross-fitted point estimate."""
    m = int(m)
    validate_causal(ds, m)
    if k < 2:
        raise MalformedInput(f"cross-fitting needs k >= 2, got {k}")
    if k > ds.n:
        raise FoldTooSmall(f"cannot split n={ds.n} units into k={k} nonempty folds")
    xv = ds.covariates.points
    y = ds.outcomes
    treat = ds.treatments
    folds = _fold_partition(ds.n, k, seed)
    fold_estimates = []
    for fold_idx in folds:
        out_mask = np.ones(ds.n, dtype=bool)
        out_mask[fold_idx] = False
        out_idx = np.flatnonzero(out_mask)
        out_t = out_idx[treat[out_idx] == 1]
        out_c = out_idx[treat[out_idx] == 0]
        if len(out_t) < m or len(out_c) < m:
            raise FoldTooSmall(
                f"a fold complement has fewer than m={m} units in a group "
                f"(treated {len(out_t)}, control {len(out_c)})"
            )
        ds_out = _subset(ds, out_idx)
        mu0_k = fit_outcome_model(ds_out, 0, degree)
        mu1_k = fit_outcome_model(ds_out, 1, degree)
        in_t = fold_idx[treat[fold_idx] == 1]
        in_c = fold_idx[treat[fold_idx] == 0]
        # in-fold units are "new points" against the out-of-fold two-sample
        # matching structure of the opposite group
        k1_in = np.zeros(len(in_t), dtype=np.int64)
        if len(in_t):
            _, k_new = match_counts_extended(
                PointSet(xv[out_t]), PointSet(xv[out_c]), m,
                PointSet(xv[in_t]), method=method)
            k1_in = k_new.counts
        k0_in = np.zeros(len(in_c), dtype=np.int64)
        if len(in_c):
            _, k_new = match_counts_extended(
                PointSet(xv[out_c]), PointSet(xv[out_t]), m,
                PointSet(xv[in_c]), method=method)
            k0_in = k_new.counts
        n_fold = len(fold_idx)
        mu1_in = mu1_k.predict(xv[fold_idx])
        mu0_in = mu0_k.predict(xv[fold_idx])
        reg_part = float(np.mean(mu1_in - mu0_in))
        adj = 0.0
        if len(in_t):
            adj += np.dot(1.0 + k1_in / m, y[in_t] - mu1_k.predict(xv[in_t]))
        if len(in_c):
            adj -= np.dot(1.0 + k0_in / m, y[in_c] - mu0_k.predict(xv[in_c]))
        fold_estimates.append(reg_part + float(adj) / n_fold)
    tau = float(np.mean(fold_estimates))
    mu0_full = fit_outcome_model(ds, 0, degree)
    mu1_full = fit_outcome_model(ds, 1, degree)
    idx_t, idx_c, _, _, k1, k0 = _group_matching(ds, m, method)
    sigma2, ci = _variance_given(ds, idx_t, idx_c, k1, k0, m,
                                 mu0_full, mu1_full, tau, level)
    diags = _diagnostics(k0, k1, m)
    diags["fold_estimates"] = [float(t) for t in fold_estimates]
    diags["rank_deficient"] = bool(mu0_full.rank_deficient or mu1_full.rank_deficient)
    return AteEstimate(tau_hat=tau, method="cross-fit", m=m,
                       sigma2_hat=sigma2, ci_low=ci[0], ci_high=ci[1],
                       k_folds=k, diagnostics=diags)


# ---------------------------------------------------------------------------
# facade used by the CLI, the service, and the Monte Carlo harness
# ---------------------------------------------------------------------------

def estimate_ate(ds: CausalDataset, method: str = "bc", m: int | None = None,
                 alpha: float = 1.0, degree: int | None = None, folds: int = 2,
                 seed: int = 0, level: float = 0.95,
                 backend: str = "auto") -> AteEstimate:
    """Resolve M and the outcome degree, then dispatch on the method name
    ("matching", "bc", or "crossfit")."""
    if m is None:
        m = min(max(select_m_ate(ds.n, ds.d, alpha), 1), min(ds.n0, ds.n1))
    if degree is None:
        degree = default_outcome_degree(ds.d)
    if method == "matching":
        return ate_matching(ds, m, method=backend)
    if method == "bc":
        mu0 = fit_outcome_model(ds, 0, degree)
        mu1 = fit_outcome_model(ds, 1, degree)
        est = ate_bias_corrected(ds, m, mu0, mu1, method=backend)
        sigma2, ci = variance_estimate(ds, m, mu0, mu1, est.tau_hat,
                                       level=level, method=backend)
        return AteEstimate(tau_hat=est.tau_hat, method=est.method, m=m,
                           sigma2_hat=sigma2, ci_low=ci[0], ci_high=ci[1],
                           diagnostics=est.diagnostics)
    if method == "crossfit":
        return ate_cross_fit(ds, m, folds, degree, seed, method=backend,
                             level=level)
    raise MalformedInput(f"unknown ATE method {method!r}")
