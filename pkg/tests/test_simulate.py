import math

import numpy as np
import pytest
from scipy.integrate import quad

from matchkit.data import PointSet
from matchkit.errors import EmptyRun, MalformedInput, OutsideSupport
from matchkit.ratio import density_ratio_at_points
from matchkit.simulate import (
    CausalSpec,
    Polynomial,
    TwoSampleSpec,
    bench_scaling,
    generate_causal,
    generate_two_sample,
    mc_ate_coverage,
    mc_kl_bias,
    mc_l1_risk,
    mc_pointwise_risk,
    true_ratio,
)

UNIF1 = TwoSampleSpec(family="uniform-cube", d=1)
SUB1 = TwoSampleSpec(family="uniform-subinterval", d=1, params={"b": 0.5})


def ac5_spec():
    return CausalSpec(
        d=2,
        propensity_intercept=0.3,
        propensity_slopes=(0.4, 0.0),
        mu0=Polynomial(2, {(1, 0): 1.0, (0, 1): 1.0}),
        mu1=Polynomial(2, {(0, 0): 1.0, (1, 0): 2.0, (0, 1): 1.0}),
        noise_sigma=1.0,
    )


def test_generation_deterministic():
    a = generate_two_sample(UNIF1, 3, 2, seed=11)
    b = generate_two_sample(UNIF1, 3, 2, seed=11)
    assert a[0].points.tobytes() == b[0].points.tobytes()
    assert a[1].points.tobytes() == b[1].points.tobytes()
    c = generate_two_sample(UNIF1, 3, 2, seed=12)
    assert a[0].points.tobytes() != c[0].points.tobytes()


def test_subinterval_support():
    _, z = generate_two_sample(SUB1, 10, 500, seed=3)
    assert z.points.max() <= 0.5
    assert z.points.min() >= 0.0


def test_uniform_mean_sanity():
    spec2 = TwoSampleSpec(family="uniform-cube", d=2)
    x, _ = generate_two_sample(spec2, 10 ** 5, 1, seed=5)
    assert np.all(np.abs(x.points.mean(axis=0) - 0.5) < 0.01)


def test_true_ratio_values():
    assert true_ratio(UNIF1, [0.3]) == 1.0
    assert true_ratio(SUB1, [0.25]) == 2.0
    assert true_ratio(SUB1, [0.75]) == 0.0
    with pytest.raises(OutsideSupport):
        true_ratio(SUB1, [1.5])


def test_truncated_gaussian_ratio_and_kl():
    spec = TwoSampleSpec(family="truncated-gaussian-on-cube", d=1,
                         params={"mu": 0.5, "sigma": 0.25})

    def f1(x):
        return float(spec.ratio_values(np.array([[x]]))[0])

    total, _ = quad(f1, 0.0, 1.0)
    assert total == pytest.approx(1.0, abs=1e-9)
    kl_quad, _ = quad(lambda x: f1(x) * math.log(f1(x)), 0.0, 1.0)
    assert spec.analytic_kl() == pytest.approx(kl_quad, abs=1e-9)


def test_truncated_gaussian_sampling_matches_density():
    spec = TwoSampleSpec(family="truncated-gaussian-on-cube", d=1,
                         params={"mu": 0.4, "sigma": 0.3})
    _, z = generate_two_sample(spec, 1, 200_000, seed=9)
    # empirical mass below 0.4 vs quadrature of the density
    mass, _ = quad(lambda x: float(spec.ratio_values(np.array([[x]]))[0]), 0, 0.4)
    assert np.mean(z.points[:, 0] < 0.4) == pytest.approx(mass, abs=0.01)


def test_generate_causal_properties():
    spec = ac5_spec()
    assert spec.true_tau() == pytest.approx(1.5)
    ds = generate_causal(spec, 10 ** 5, seed=2)
    assert abs(ds.n1 / ds.n - 0.5) < 0.02  # E[e(X)] = 0.3 + 0.4 * 0.5
    again = generate_causal(spec, 10 ** 5, seed=2)
    assert np.array_equal(ds.outcomes, again.outcomes)


def test_generate_causal_zero_noise_constant_effect():
    spec = CausalSpec(
        d=1, propensity_intercept=0.5, propensity_slopes=(0.0,),
        mu0=Polynomial(1, {(0,): 1.0}),
        mu1=Polynomial(1, {(0,): 4.0}),
        noise_sigma=0.0,
    )
    ds = generate_causal(spec, 50, seed=1)
    treated = ds.outcomes[ds.treatments == 1]
    control = ds.outcomes[ds.treatments == 0]
    assert np.all(treated == 4.0) and np.all(control == 1.0)


def test_propensity_overlap_enforced():
    with pytest.raises(MalformedInput):
        CausalSpec(d=1, propensity_intercept=0.1, propensity_slopes=(0.0,),
                   mu0=Polynomial(1, {}), mu1=Polynomial(1, {}), noise_sigma=1.0)


def test_pointwise_risk_plumbing():
    report = mc_pointwise_risk(UNIF1, [0.5], [200], reps=1, alpha=1.0, seed=7)
    assert len(report.cells) == 1
    assert report.cells[0]["reps"] == 1
    assert report.slope is None  # single grid point


def test_pointwise_risk_matches_public_ratio_path():
    # the harness shortcut must equal the public at-points estimator
    spec = UNIF1
    rng = np.random.default_rng(31)
    x = PointSet(rng.random(300))
    z = PointSet(rng.random(300))
    at_pts, _ = density_ratio_at_points(x, z, 17, PointSet([0.5]))
    from matchkit.matching import nn_radii_sq
    r2 = nn_radii_sq(x.points, z.points, 17)
    k = int((((z.points - np.array([0.5])) ** 2).sum(axis=1) <= r2).sum())
    assert at_pts.values[0] == k / 17


def test_l1_risk_deterministic_and_decreasing():
    r1 = mc_l1_risk(SUB1, [200, 400, 800], reps=8, alpha=1.0, seed=13)
    r2 = mc_l1_risk(SUB1, [200, 400, 800], reps=8, alpha=1.0, seed=13)
    vals1 = [c["value"] for c in r1.cells]
    vals2 = [c["value"] for c in r2.cells]
    assert vals1 == vals2
    assert vals1[0] > vals1[-1]


def test_kl_bias_report():
    report = mc_kl_bias(SUB1, [400], reps=5, alpha=1.0, seed=17)
    assert report.truth == pytest.approx(math.log(2))
    assert abs(report.cells[0]["bias"]) < 0.2


def test_coverage_zero_noise_exact_models():
    spec = CausalSpec(
        d=1, propensity_intercept=0.5, propensity_slopes=(0.0,),
        mu0=Polynomial(1, {(0,): 0.0, (1,): 1.0}),
        mu1=Polynomial(1, {(0,): 2.0, (1,): 1.0}),  # constant effect 2
        noise_sigma=0.0,
    )
    out = mc_ate_coverage(spec, n=60, reps=5, method="bc", seed=23, degree=1)
    assert out["true_tau"] == pytest.approx(2.0)
    # intervals collapse onto tau up to least-squares roundoff
    assert abs(out["mean_bias"]) <= 1e-9
    assert out["mean_sd_hat"] <= 1e-9


def test_coverage_rejects_empty_run_and_bad_method():
    with pytest.raises(EmptyRun):
        mc_ate_coverage(ac5_spec(), n=100, reps=0, method="bc", seed=1)
    with pytest.raises(MalformedInput):
        mc_ate_coverage(ac5_spec(), n=100, reps=2, method="matching", seed=1)


def test_parallel_equals_serial(monkeypatch):
    def run():
        return mc_l1_risk(SUB1, [150, 300], reps=6, alpha=1.0, seed=29)

    monkeypatch.setenv("MATCHKIT_THREADS", "1")
    serial = run()
    monkeypatch.setenv("MATCHKIT_THREADS", "4")
    parallel = run()
    for a, b in zip(serial.cells, parallel.cells):
        assert a["value"] == b["value"]
    assert serial.slope == parallel.slope


def test_bench_single_row():
    out = bench_scaling([500], d=2, m_rule=("fixed", 5), seed=3)
    assert len(out["rows"]) == 1
    assert out["ratios"] == []
    assert out["rows"][0]["seconds"] > 0


def test_spec_round_trip():
    spec = ac5_spec()
    assert CausalSpec.from_dict(spec.to_dict()) == spec
    ts = TwoSampleSpec.from_dict(SUB1.to_dict())
    assert ts == SUB1
