"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The Monte Carlo criteria run at the sizes and tolerances fixed below; the
whole module is designed to finish in a few minutes.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from matchkit.ate import ate_bias_corrected, ate_matching, fit_outcome_model, zero_model
from matchkit.data import CausalDataset, PointSet
from matchkit.divergence import select_m_kl
from matchkit.io import dumps as mk_dumps
from matchkit.kdtree import build
from matchkit.matching import (
    brute_force_match_counts,
    match_counts_by_group,
    match_counts_extended,
    match_counts_sample,
)
from matchkit.ratio import density_ratio_at_sample
from matchkit.simulate import (
    CausalSpec,
    Polynomial,
    TwoSampleSpec,
    bench_scaling,
    mc_ate_coverage,
    mc_kl_bias,
    mc_l1_risk,
    mc_pointwise_risk,
)

from helpers import brute_knn


def report(capsys, name: str, ok: bool, detail: str):
    with capsys.disabled():
        print(f"{name} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def corpus():
    """200 random two-sample instances with N0, N1 <= 200, d <= 5, M <= 20."""
    rng = np.random.default_rng(20240817)
    out = []
    for _ in range(200):
        d = int(rng.integers(1, 6))
        n0 = int(rng.integers(2, 201))
        n1 = int(rng.integers(1, 201))
        m = int(rng.integers(1, min(n0, 20) + 1))
        x = PointSet(rng.normal(size=(n0, d)))
        z = PointSet(rng.normal(size=(n1, d)))
        out.append((x, z, m, rng.normal(size=(int(rng.integers(1, 8)), d))))
    return out


@pytest.fixture(scope="module")
def causal_corpus():
    rng = np.random.default_rng(90210)
    out = []
    for _ in range(200):
        d = int(rng.integers(1, 4))
        while True:
            n = int(rng.integers(10, 160))
            treat = rng.integers(0, 2, size=n)
            if 3 <= treat.sum() <= n - 3:
                break
        ds = CausalDataset(PointSet(rng.normal(size=(n, d))), treat,
                           rng.normal(size=n))
        m = int(rng.integers(1, min(ds.n0, ds.n1, 10) + 1))
        out.append((ds, m))
    return out


def test_ac1_oracle_equivalence(corpus, capsys):
    t0 = time.perf_counter()
    checked_knn = 0
    for x, z, m, new in corpus:
        ref = brute_force_match_counts(x, z, m)
        mc_auto = match_counts_sample(x, z, m)
        mc_tree = match_counts_sample(x, z, m, method="kdtree")
        assert np.array_equal(mc_auto.counts, ref.counts)
        assert np.array_equal(mc_tree.counts, ref.counts)
        k_x, k_new = match_counts_extended(x, z, m, PointSet(new))
        assert np.array_equal(k_x.counts, ref.counts)
        # knn vs brute force on a few queries per instance
        tree = build(x)
        k = min(x.n, 20)
        for q in z.points[:3]:
            ids_o, dist_o = brute_knn(x.points, q, k)
            nl = tree.knn(q, k)
            assert np.array_equal(nl.ids, ids_o)
            assert np.array_equal(nl.distances, dist_o)
            checked_knn += 1
    elapsed = time.perf_counter() - t0
    report(capsys, "AC-1", elapsed < 60.0,
           f"200 instances, counts and {checked_knn} knn queries equal the "
           f"oracle exactly in {elapsed:.1f}s")


def test_ac2_exact_identities(corpus, causal_corpus, capsys):
    worst_mean = 0.0
    for x, z, m, _ in corpus:
        mc = match_counts_sample(x, z, m)
        assert int(mc.counts.sum()) == z.n * m
        est = density_ratio_at_sample(x, z, m)
        worst_mean = max(worst_mean, abs(float(est.values.mean()) - 1.0))
    for ds, m in causal_corpus:
        k0, k1 = match_counts_by_group(ds, m)
        assert int(k1.counts.sum()) == ds.n0 * m
        assert int(k0.counts.sum()) == ds.n1 * m
    report(capsys, "AC-2", worst_mean <= 1e-12,
           f"sum and group identities exact; max |mean(r-hat) - 1| = {worst_mean:.2e}")


def _oracle_bc_imputation(ds, m, mu0, mu1):
    """Independent imputation-form computation via stable distance sorts."""
    xv = ds.covariates.points
    y = ds.outcomes
    idx_t = ds.group_indices(1)
    idx_c = ds.group_indices(0)
    mu1_all = mu1.predict(xv)
    mu0_all = mu0.predict(xv)

    def m_nn(target_idx, qi):
        d2 = ((xv[target_idx] - xv[qi]) ** 2).sum(axis=1)
        return target_idx[np.argsort(d2, kind="stable")[:m]]

    yhat1 = np.empty(ds.n)
    yhat0 = np.empty(ds.n)
    for i in range(ds.n):
        if ds.treatments[i] == 1:
            yhat1[i] = y[i]
            js = m_nn(idx_c, i)
            yhat0[i] = np.mean(y[js] + mu0_all[i] - mu0_all[js])
        else:
            yhat0[i] = y[i]
            js = m_nn(idx_t, i)
            yhat1[i] = np.mean(y[js] + mu1_all[i] - mu1_all[js])
    return float(np.mean(yhat1 - yhat0))


def test_ac3_form_equivalence(causal_corpus, capsys):
    worst_forms = 0.0
    worst_reduction = 0.0
    for ds, m in causal_corpus:
        degree = 0 if min(ds.n0, ds.n1) <= ds.d + 1 else 1
        mu0 = fit_outcome_model(ds, 0, degree)
        mu1 = fit_outcome_model(ds, 1, degree)
        est = ate_bias_corrected(ds, m, mu0, mu1)
        oracle = _oracle_bc_imputation(ds, m, mu0, mu1)
        worst_forms = max(worst_forms, abs(est.tau_hat - oracle))
        zm = zero_model(ds.d)
        reduced = ate_bias_corrected(ds, m, zm, zm).tau_hat
        plain = ate_matching(ds, m).tau_hat
        worst_reduction = max(worst_reduction, abs(reduced - plain))
    ok = worst_forms <= 1e-10 and worst_reduction <= 1e-12
    report(capsys, "AC-3", ok,
           f"200 instances: max |weighting - imputation| = {worst_forms:.2e}, "
           f"max zero-model reduction gap = {worst_reduction:.2e}")


def test_ac4_pointwise_rate(capsys):
    grid = [500, 1000, 2000, 4000, 8000]
    rep1 = mc_pointwise_risk(TwoSampleSpec("uniform-cube", 1), [0.5], grid,
                             reps=200, alpha=1.0, seed=41)
    rep2 = mc_pointwise_risk(TwoSampleSpec("uniform-cube", 2), [0.5, 0.5],
                             grid, reps=200, alpha=1.0, seed=42)
    ok1 = -0.85 <= rep1.slope <= -0.50
    ok2 = -0.70 <= rep2.slope <= -0.35
    report(capsys, "AC-4", ok1 and ok2,
           f"log-log MSE slopes: d=1 {rep1.slope:.3f} (band [-0.85, -0.50]), "
           f"d=2 {rep2.slope:.3f} (band [-0.70, -0.35])")


def ac5_spec():
    return CausalSpec(
        d=2,
        propensity_intercept=0.3,
        propensity_slopes=(0.4, 0.0),
        mu0=Polynomial(2, {(1, 0): 1.0, (0, 1): 1.0}),
        mu1=Polynomial(2, {(0, 0): 1.0, (1, 0): 2.0, (0, 1): 1.0}),
        noise_sigma=1.0,
    )


def test_ac5_ate_coverage(capsys):
    spec = ac5_spec()
    assert spec.true_tau() == pytest.approx(1.5)
    lines = []
    ok = True
    for method in ("bc", "crossfit"):
        out = mc_ate_coverage(spec, n=2000, reps=500, method=method, seed=55,
                              degree=1, folds=2)
        good = abs(out["mean_bias"]) <= 0.03 and 0.92 <= out["coverage"] <= 0.98
        ok = ok and good
        lines.append(f"{method}: coverage={out['coverage']:.3f} "
                     f"bias={out['mean_bias']:+.4f}")
    report(capsys, "AC-5", ok, "; ".join(lines) +
           " (bands: coverage [0.92, 0.98], |bias| <= 0.03)")


def test_ac6_kl_estimator(capsys):
    sub = TwoSampleSpec("uniform-subinterval", 1, {"b": 0.5})
    rep = mc_kl_bias(sub, [5000], reps=100, alpha=1.0, seed=66)
    mean_est = rep.cells[0]["mean_estimate"]
    m_used = rep.cells[0]["m"]
    assert m_used == select_m_kl(5000, 5000, 1)
    same = mc_kl_bias(TwoSampleSpec("uniform-cube", 1), [5000], reps=100,
                      alpha=1.0, seed=67)
    mean_same = same.cells[0]["mean_estimate"]
    ok = abs(mean_est - math.log(2)) <= 0.10 and abs(mean_same) <= 0.05
    report(capsys, "AC-6", ok,
           f"mean KL-hat = {mean_est:.4f} vs ln 2 = {math.log(2):.4f} "
           f"(tol 0.10); identical-law mean = {mean_same:.4f} (tol 0.05); "
           f"M = {m_used}")


def test_ac7_complexity_scaling(capsys):
    out = bench_scaling([100_000, 200_000, 400_000], d=2,
                        m_rule=("fixed", 10), seed=77)
    ratios = out["ratios"]
    times = [f"n={r['n']}: {r['seconds']:.1f}s" for r in out["rows"]]
    ok = len(ratios) == 2 and all(r <= 2.6 for r in ratios)
    report(capsys, "AC-7", ok,
           f"doubling ratios {[f'{r:.2f}' for r in ratios]} (cap 2.6); "
           + ", ".join(times))


def _strip_wall_time(text: str) -> str:
    payload = json.loads(text)
    payload["manifest"].pop("wall_time_s")
    return mk_dumps(payload)


def test_ac8_determinism(tmp_path, capsys, monkeypatch):
    spec = '{"family": "uniform-subinterval", "d": 1, "params": {"b": 0.5}}'
    argv = [sys.executable, "-m", "matchkit", "simulate", "--task", "l1-risk",
            "--spec", spec, "--n-grid", "300,600", "--reps", "10",
            "--seed", "88"]
    outs = []
    for _ in range(2):
        proc = subprocess.run(argv, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(proc.stdout)
    byte_identical = _strip_wall_time(outs[0]) == _strip_wall_time(outs[1])
    result_identical = (outs[0][outs[0].index('"result"'):]
                        == outs[1][outs[1].index('"result"'):])

    # parallel and serial runs agree per reported number
    sub = TwoSampleSpec("uniform-subinterval", 1, {"b": 0.5})
    monkeypatch.setenv("MATCHKIT_THREADS", "1")
    serial = mc_l1_risk(sub, [200, 400], reps=8, alpha=1.0, seed=89)
    monkeypatch.setenv("MATCHKIT_THREADS", "4")
    parallel = mc_l1_risk(sub, [200, 400], reps=8, alpha=1.0, seed=89)
    monkeypatch.delenv("MATCHKIT_THREADS")
    max_gap = max(abs(a["value"] - b["value"])
                  for a, b in zip(serial.cells, parallel.cells))
    ok = byte_identical and result_identical and max_gap <= 1e-12
    report(capsys, "AC-8", ok,
           f"repeat runs byte-identical (wall time aside); "
           f"parallel vs serial max gap = {max_gap:.1e}")
