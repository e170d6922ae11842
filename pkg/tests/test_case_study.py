"""Toenail-shaped case study on synthetic data from the final model."""

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss
from scipy import special

from npdcat import SeedSpec, calibrate, presets, simulate_dataset
from npdcat.stattests import InapplicableTestError, check_balanced


@pytest.fixture(scope="module")
def design():
    return presets.toenail_like_design()


@pytest.fixture(scope="module")
def results(design):
    data = simulate_dataset(presets.TOENAIL_FINAL, design, SeedSpec(10))
    out = {}
    for name in ("final_toenail", "constant_toenail"):
        cal = calibrate(presets.get_model(name), design, 200, 1000, 0, chi2=False, cache=False)
        v = cal.npd(data)
        out[name] = (cal.test_npd(v), cal.test_stratified(v))
    return out


def test_design_shape(design):
    assert design.N == 294 and design.n_obs == 1908
    with pytest.raises(InapplicableTestError):
        check_balanced(design)


def test_final_model_not_rejected(results):
    glob, strat = results["final_toenail"]
    assert not glob.reject and not strat.reject


def test_stratified_test_catches_missing_time_trend(results):
    assert results["constant_toenail"][1].reject


def test_pooled_pd_uniform_under_marginal_matching_constant_model(design):
    # F(0) of the constant model equals the average of the true P_t(Y=0) over
    # the observations, so the pooled pd distribution is exactly uniform and
    # the global KS test has no power beyond correlation effects
    z, w = hermegauss(120)
    w = w / w.sum()
    final, const = presets.TOENAIL_FINAL, presets.TOENAIL_CONSTANT
    x = design.obs_covariate("trt")
    p0 = special.expit(-(final.mu[0] + final.omega[0] * z[:, None]
                         + (final.mu[1] + final.beta * x) * design.obs_time))
    F = w @ special.expit(-(const.mu[0] + const.omega[0] * z))
    assert (w @ p0).mean() == pytest.approx(F, abs=0.01)
