"""Shared result builders behind the CLI and the HTTP service.

Both surfaces call the same functions here so their numeric payloads are
identical; only input transport (CSV files vs JSON arrays) differs.
"""

from __future__ import annotations

import time

from . import __version__
from .ate import default_outcome_degree, estimate_ate, select_m_ate
from .data import CausalDataset, PointSet
from .divergence import kl_estimate, select_m_kl
from .errors import MalformedInput
from .ratio import (
    density_ratio_at_points,
    density_ratio_at_sample,
    noshad_ratio,
    select_m_ratio,
    two_step_ratio,
)
from .simulate import (
    CausalSpec,
    TwoSampleSpec,
    bench_scaling,
    mc_ate_coverage,
    mc_kl_bias,
    mc_l1_risk,
    mc_pointwise_risk,
)

OVERRIDE_WARNING = "explicit m overrides the alpha rule"


def build_manifest(command: str, config: dict, inputs: dict, seed: int,
                   wall_time_s: float) -> dict:
    return {
        "command": command,
        "config": config,
        "inputs": inputs,
        "seed": int(seed),
        "version": __version__,
        "wall_time_s": float(wall_time_s),
    }


def finish(command: str, config: dict, inputs: dict, seed: int, result: dict,
           t0: float) -> dict:
    manifest = build_manifest(command, config, inputs, seed,
                              time.perf_counter() - t0)
    return {"manifest": manifest, "result": result}


def _resolve_m(m, alpha, selector, *args):
    """Explicit m wins over the alpha rule; returns (m, warned)."""
    if m is not None:
        return int(m), alpha is not None
    return selector(*args, 1.0 if alpha is None else float(alpha)), False


def run_ratio(x: PointSet, z: PointSet, m=None, alpha=None) -> dict:
    m, warned = _resolve_m(m, alpha, select_m_ratio, x.n, z.n, x.d)
    est = density_ratio_at_sample(x, z, m)
    result = {
        "eval_kind": est.eval_kind,
        "m": est.m,
        "n0": est.n0,
        "n1": est.n1,
        "values": est.values.tolist(),
    }
    if warned:
        result["warning"] = OVERRIDE_WARNING
    return result


def run_ratio_at(x: PointSet, z: PointSet, pts: PointSet, baseline="matching",
                 m=None, alpha=None) -> dict:
    if baseline == "matching":
        m, warned = _resolve_m(m, alpha, select_m_ratio, x.n, z.n, x.d)
        at_points, at_sample = density_ratio_at_points(x, z, m, pts)
        sample_values = at_sample.values.tolist()
    elif baseline == "two-step":
        m, warned = _resolve_m(m, alpha, select_m_ratio, x.n, z.n, x.d)
        m = min(m, z.n)
        at_points = two_step_ratio(x, z, m, pts)
        sample_values = None
    elif baseline == "noshad":
        m, warned = _resolve_m(m, alpha, select_m_ratio, x.n, z.n, x.d)
        at_points = noshad_ratio(x, z, m, pts)
        sample_values = None
    else:
        raise MalformedInput(f"unknown baseline {baseline!r}")
    result = {
        "baseline": baseline,
        "m": int(m),
        "n0": x.n,
        "n1": z.n,
        "at_points": at_points.values.tolist(),
        "at_sample": sample_values,
    }
    if warned:
        result["warning"] = OVERRIDE_WARNING
    return result


def run_kl(x: PointSet, z: PointSet, m=None, alpha=None) -> dict:
    m, warned = _resolve_m(m, alpha, select_m_kl, x.n, z.n, x.d)
    est = kl_estimate(x, z, m)
    result = {"value": est.value, "m": est.m, "n0": est.n0, "n1": est.n1}
    if warned:
        result["warning"] = OVERRIDE_WARNING
    return result


def run_ate(ds: CausalDataset, method="bc", m=None, alpha=None, degree=None,
            folds=2, seed=0, level=0.95) -> dict:
    if m is not None and alpha is not None:
        warned = True
    else:
        warned = False
    if m is None:
        m = min(max(select_m_ate(ds.n, ds.d, 1.0 if alpha is None else float(alpha)), 1),
                min(ds.n0, ds.n1))
    if degree is None:
        degree = default_outcome_degree(ds.d)
    est = estimate_ate(ds, method=method, m=int(m), degree=int(degree),
                       folds=int(folds), seed=int(seed), level=level)
    result = {
        "method": est.method,
        "tau_hat": est.tau_hat,
        "sigma2_hat": est.sigma2_hat,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "m": est.m,
        "k_folds": est.k_folds,
        "n": ds.n,
        "n0": ds.n0,
        "n1": ds.n1,
        "degree": int(degree) if method != "matching" else None,
        "level": level,
        "diagnostics": est.diagnostics,
    }
    if warned:
        result["warning"] = OVERRIDE_WARNING
    return result


def run_simulate(task: str, spec_dict: dict, n_grid=None, reps=100, alpha=1.0,
                 seed=0, eval_point=None, n=None, method="bc", degree=None,
                 folds=2) -> dict:
    if task in ("pw-risk", "l1-risk", "kl-bias"):
        spec = TwoSampleSpec.from_dict(spec_dict)
        if not n_grid:
            raise MalformedInput("this task needs --n-grid")
        if task == "pw-risk":
            if eval_point is None:
                raise MalformedInput("pw-risk needs --eval-point")
            report = mc_pointwise_risk(spec, eval_point, n_grid, reps, alpha, seed)
        elif task == "l1-risk":
            report = mc_l1_risk(spec, n_grid, reps, alpha, seed)
        else:
            report = mc_kl_bias(spec, n_grid, reps, alpha, seed)
        out = report.to_dict()
        out["spec"] = spec.to_dict()
        return out
    if task == "coverage":
        spec = CausalSpec.from_dict(spec_dict)
        if n is None:
            raise MalformedInput("coverage needs --n")
        out = mc_ate_coverage(spec, int(n), reps, method, seed, alpha=alpha,
                              degree=degree, folds=folds)
        out["spec"] = spec.to_dict()
        return out
    raise MalformedInput(f"unknown simulate task {task!r}")


def run_bench(n_grid, d: int, m=None, alpha=None, seed=0) -> dict:
    if m is not None:
        rule = ("fixed", int(m))
    else:
        rule = ("ratio", 1.0 if alpha is None else float(alpha))
    return bench_scaling(n_grid, d, rule, seed)
