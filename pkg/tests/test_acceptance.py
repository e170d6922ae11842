"""Acceptance criteria at full scale (seed 0).

Each test records one PASS/FAIL line; the lines are also collected in the
"acceptance criteria" section of the pytest summary.  Tolerances are the
stated ones; nothing is tuned per seed.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from npdcat import (Design, ModelSpec, SeedSpec, calibrate, compute_npd, counting_marginal_cdf,
                    estimate_marginal_cdf, io, presets, rng, simulate_dataset)
from npdcat.model import CategorySpace, Shape, StructuralShape

from _cli_runs import prepare, run_all
from _study import se
from conftest import record, toenail_path
from test_npd import quadrature_p0

SEED = 0


def _fmt(rows, keys):
    return "; ".join(", ".join(f"{k}={r[k]}" for k in keys) for r in rows)


def test_criterion_01_calibration_exactness():
    d = Design.balanced(50, presets.STUDY_TIMES)
    t0 = time.perf_counter()
    cal = calibrate(presets.TABLE1, d, B=200, V=1000, master_seed=SEED, chi2=False, cache=False)
    fresh_seed = rng.derive_seed(SEED, "fresh-h0")
    rejected = sum(cal.test_npd(cal.npd(simulate_dataset(presets.TABLE1, d,
                                                         SeedSpec(fresh_seed, (r, 0))), r)).reject
                   for r in range(200))
    elapsed = time.perf_counter() - t0
    n_exc = cal.ks_null.n_exceeding()
    rate = rejected / 200
    ok = n_exc == 10 and abs(rate - 0.05) <= 0.03 and elapsed < 300
    record(1, ok, f"{n_exc} calibration statistics exceed the threshold (want 10); fresh H0 "
                  f"rejection {rate:.3f} (want 0.05 +- 0.03); {elapsed:.1f} s (want < 300)")
    assert ok


def test_criterion_02_random_effect_insensitivity(study):
    rows = [r for r in study["parameter"]
            if r["varied"] == "omega1" and r["N"] == 274 and not r["null"]]
    worst = max(rows, key=lambda r: r["power_npd"])
    ok = len(rows) == 20 and all(r["power_npd"] <= 0.35 for r in rows)
    record(2, ok, f"max npd power over {len(rows)} omega1 scenarios at N=274 is "
                  f"{worst['power_npd']:.3f} ({worst['scenario']}); want <= 0.35")
    assert ok


def test_criterion_03_structural_indistinguishability(study):
    rows = [r for r in study["structural"]
            if {r["true_value"], r["tested_value"]} == {"M3", "M4"}]
    bad = [r for r in rows if abs(r["power_npd"] - 0.05) > 0.05]
    detail = ", ".join(f"{r['scenario']}={r['power_npd']:.3f}" for r in rows)
    record(3, not bad and len(rows) == 6, f"npd power M3 vs M4: {detail}; want 0.05 +- 0.05")
    assert not bad, _fmt(bad, ("scenario", "power_npd"))


def test_criterion_04_m2_separability(study):
    rows = [r for r in study["structural"] if r["N"] == 274 and not r["null"]
            and "M2" in (r["true_value"], r["tested_value"])]
    bad = [r for r in rows if r["power_npd"] < 0.80]
    worst = min(rows, key=lambda r: r["power_npd"])
    record(4, not bad and len(rows) == 6,
           f"min npd power over {len(rows)} M2 pairings at N=274 is {worst['power_npd']:.3f} "
           f"({worst['scenario']}); want >= 0.80")
    assert not bad, _fmt(bad, ("scenario", "power_npd"))


def test_criterion_05_chi2_dominance(study):
    rows = [r for r in study["parameter"]
            if r["varied"] in ("mu1", "mu2", "beta") and not r["null"]]
    bad = [r for r in rows if r["power_chi2"] < r["power_npd"] - 0.05]
    record(5, not bad, f"{len(bad)} of {len(rows)} fixed-effect scenarios have "
                       f"chi2 power < npd power - 0.05"
                       + "".join(f"; {r['scenario']} npd={r['power_npd']:.3f} "
                                 f"chi2={r['power_chi2']:.3f}" for r in bad))
    assert not bad, _fmt(bad, ("scenario", "power_npd", "power_chi2"))


def test_criterion_06_sample_size_monotonicity(study):
    bad, n = [], 0
    for grid in ("parameter", "structural"):
        by_key = {(r["varied"], r["true_value"], r["tested_value"], r["N"]): r
                  for r in study[grid]}
        for (v, t, tv, N), big in by_key.items():
            if N != 274 or big["null"]:
                continue
            small = by_key[(v, t, tv, 50)]
            for test in ("power_npd", "power_chi2"):
                n += 1
                # Monte Carlo SE of the difference of two independent-B estimates
                tol = 2 * math.hypot(se(small[test]), se(big[test]))
                if big[test] < small[test] - tol:
                    bad.append({"scenario": big["scenario"], "test": test,
                                "N50": small[test], "N274": big[test]})
    record(6, not bad, f"{len(bad)} of {n} (scenario, test) pairs have power(274) < "
                       f"power(50) - 2 mc_se"
                       + "".join(f"; {b['scenario']} {b['test']} N50={b['N50']:.3f} "
                                 f"N274={b['N274']:.3f}" for b in bad))
    assert not bad, _fmt(bad, ("scenario", "test", "N50", "N274"))


def test_criterion_07_toenail_marginals():
    m = presets.TOENAIL_FINAL
    d = Design.balanced(2, (0.0, 12.0))  # subject 1 arm A (trt 0), subject 2 arm B
    t0 = time.perf_counter()
    mc = estimate_marginal_cdf(m, d, 100_000, SEED)
    p1 = 1 - mc.F[:, 0]
    got = {"t0": p1[0], "A12": p1[1], "B12": p1[3]}
    want = {"t0": 0.65, "A12": 0.92, "B12": 0.97}
    ok = all(abs(got[k] - want[k]) <= 0.02 for k in want) and abs(p1[2] - p1[0]) < 0.01
    record(7, ok, "P(Y=1): " + ", ".join(f"{k}={got[k]:.4f} (want {want[k]} +- 0.02)"
                                          for k in want)
           + f"; {time.perf_counter() - t0:.2f} s")
    assert ok


def test_criterion_08_toenail_decisions():
    path = toenail_path()
    if path is None:
        msg = ("toenail data file not available (set NPDCAT_TOENAIL_CSV or add "
               "tests/data/toenail.csv); decisions cannot be checked")
        record(8, False, msg)
        pytest.fail(msg)
    data = io.parse_dataset(path, time_factor=0.25)
    dec = {}
    for name in ("final_toenail", "constant_toenail"):
        cal = calibrate(presets.get_model(name), data.design, B=200, V=1000, master_seed=SEED,
                        chi2=False, cache=False)
        dec[name] = cal.test_npd(cal.npd(data))
    ok = not dec["final_toenail"].reject and dec["constant_toenail"].reject
    record(8, ok, ", ".join(f"{k}: reject={d.reject} D={d.statistic:.4f} thr={d.threshold:.4f}"
                            for k, d in dec.items())
           + "; want final not rejected, constant rejected")
    assert ok


SUITE_MODELS = {
    "table1": presets.TABLE1,
    "M2": presets.STRUCTURAL["M2"],
    "M3": presets.STRUCTURAL["M3"],
    "M4": presets.STRUCTURAL["M4"],
    "toenail_final": presets.TOENAIL_FINAL,
    "toenail_constant": presets.TOENAIL_CONSTANT,
    "no_random_effects": presets.TABLE1.replace(omega=(0.0, 0.0)),
    "ordinal3": ModelSpec(categories=CategorySpace((0, 1, 2)), cutpoints=(-1.0, 1.0),
                          mu=(-0.5, 0.1), omega=(1.0, 0.1), beta=0.2),
}


def _pd_rejection_rate(model, reps=500, n=100):
    """KS(pd, U(0,1)) rejection rate using one visit per subject per replicate.

    Visits of one subject share its random effects, so only one (rotating)
    visit per subject enters each replicate's test.
    """
    d = Design.balanced(n, presets.STUDY_TIMES)
    k = len(presets.STUDY_TIMES)
    seed = rng.derive_seed(SEED, "pd-uniformity", model.key())
    marginal = estimate_marginal_cdf(model, d, 1000, rng.derive_seed(seed, "marginal"))
    rejected = 0
    for r in range(reps):
        data = simulate_dataset(model, d, SeedSpec(seed, (r, 0)))
        v = compute_npd(data, model, marginal=marginal,
                        jitter_seed=rng.derive_seed(seed, "jitter"), replicate=r)
        idx = np.arange(n) * k + (r + np.arange(n)) % k
        rejected += stats.kstest(v.pd[idx], "uniform").pvalue < 0.05
    return rejected / reps


def test_criterion_09_pd_uniformity():
    rates = {name: _pd_rejection_rate(m) for name, m in SUITE_MODELS.items()}
    bad = {k: v for k, v in rates.items() if abs(v - 0.05) > 0.02}
    record(9, not bad, "rejection rates over 500 replicates: "
           + ", ".join(f"{k}={v:.3f}" for k, v in rates.items()) + "; want 0.05 +- 0.02")
    assert not bad, bad


def _random_pair(g):
    K = int(g.choice([2, 2, 3, 4]))
    cuts = (0.0,) if K == 2 else tuple(np.sort(g.uniform(-2, 2, K - 1)).round(3))
    shape = Shape(str(g.choice(["constant", "linear", "loglinear", "quadratic", "exponential"])))
    rate = 0.2 if shape is Shape.EXPONENTIAL else None
    m = ModelSpec(categories=CategorySpace(tuple(range(K))), cutpoints=cuts,
                  shape=StructuralShape(shape, rate),
                  mu=(g.uniform(-3, 2), g.uniform(-0.3, 0.5) / (12 if shape is Shape.QUADRATIC else 1)),
                  omega=(g.uniform(0.1, 4), g.uniform(0, 0.5)), beta=g.uniform(-0.5, 1))
    times = tuple(np.sort(g.choice(13, int(g.integers(1, 5)), replace=False)).astype(float))
    return m, Design.balanced(int(g.integers(2, 9)), times)


def test_criterion_10_oracle_equivalence():
    g = np.random.default_rng(SEED)
    worst_count, n_entries = 0.0, 0
    for k in range(100):
        m, d = _random_pair(g)
        a = estimate_marginal_cdf(m, d, 1000, k)
        b = counting_marginal_cdf(m, d, 1000, k)
        z = np.abs(a.F[:, :-1] - b.F[:, :-1]) / np.hypot(a.se[:, :-1], b.se[:, :-1])
        worst_count = max(worst_count, float(z.max()))
        n_entries += z.size
    quad_models = [presets.TABLE1.replace(omega=(w, 0.0)) for w in presets.PARAMETER_GRID["omega1"]]
    quad_models.append(presets.TOENAIL_FINAL)
    d = Design.balanced(2, presets.STUDY_TIMES)
    x = d.obs_covariate("trt")
    worst_quad = 0.0
    for j, m in enumerate(quad_models):
        mc = estimate_marginal_cdf(m, d, 1000, j)
        exact = np.array([quadrature_p0(m, xi, ti) for xi, ti in zip(x, d.obs_time)]).ravel()
        worst_quad = max(worst_quad, float(np.max(np.abs(mc.F[:, 0] - exact) / mc.se[:, 0])))
    ok = worst_count <= 3 and worst_quad <= 3
    record(10, ok, f"smoothed vs counting: max {worst_count:.2f} combined SE over {n_entries} "
                   f"CDF entries of 100 random pairs; quadrature: max {worst_quad:.2f} mc_se over "
                   f"{len(quad_models)} intercept-only models; want <= 3")
    assert ok


def test_criterion_11_cli_determinism(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    prepare(tmp_path)
    one, two = run_all(tmp_path, 1), run_all(tmp_path, 2)
    differing = [k for k in one if one[k] != two.get(k)]
    ok = sorted(one) == sorted(two) and not differing
    record(11, ok, f"{len(one)} output files from simulate, npd, test, report and power with "
                   f"1 and 2 workers; {len(differing)} differ")
    assert ok, differing
