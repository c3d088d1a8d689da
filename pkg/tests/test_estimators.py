import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdrshift.distributions import LabeledSample, UnlabeledSample
from cdrshift.estimators import (
    EstimatorConfig,
    Provenance,
    estimate_cdr_set,
    fit_posterior_histogram,
    scan_klr_threshold,
    threshold_order_statistic,
    vc_epsilon,
)
from cdrshift.exceptions import InvalidInput, RankOutOfRange, UnsupportedDomain
from cdrshift.metrics import evaluate_estimate
from cdrshift.scenarios import load_scenario


def test_histogram_laplace_smoothing(five_point):
    feats = np.array([[0.0], [0.0], [0.0], [1.0], [3.0], [3.0]])
    labels = np.array([1, 1, 0, 0, 1, 1])
    h = fit_posterior_histogram(LabeledSample(feats, labels), five_point.domain)
    np.testing.assert_allclose(h.table, [3 / 5, 1 / 3, 1 / 2, 3 / 4, 1 / 2])
    np.testing.assert_array_equal(h.counts, [3, 1, 0, 2, 0])
    np.testing.assert_allclose(h(np.array([[3.0], [2.0]])), [0.75, 0.5])


def test_histogram_needs_grid():
    s2 = load_scenario("S2")
    data = s2.target.sample_labeled(10, seed=0)
    with pytest.raises(UnsupportedDomain):
        fit_posterior_histogram(data, s2.domain)


@pytest.mark.parametrize("alpha,expected", [(0.4, 3.0), (0.2, 4.0), (0.01, 4.0), (0.79, 1.0)])
def test_order_statistic_rank(alpha, expected):
    assert threshold_order_statistic([5.0, 1.0, 4.0, 2.0, 3.0], alpha) == expected


def test_order_statistic_rank_guard():
    # 10 * (1 - 0.3) is 6.999... in floating point; the rank must still be 7
    assert threshold_order_statistic(np.arange(1.0, 11.0), 0.3) == 7.0


def test_order_statistic_rank_out_of_range():
    with pytest.raises(RankOutOfRange):
        threshold_order_statistic([0.5], 0.5)


def test_vc_epsilon():
    assert vc_epsilon(2000) == pytest.approx(4 * math.sqrt(math.log(2001) / 2000))
    assert vc_epsilon(100, 0.0) == 0.0


def test_scan_on_hand_fixture():
    scores = [0.1, 0.3, 0.5, 0.7, 0.9]
    scan = scan_klr_threshold(scores, 0.4, 0.05, 0.01, eps_constant=0.0)
    assert scan.budget == pytest.approx(0.41)
    assert scan.threshold == pytest.approx(0.45)
    assert scan.admitted == pytest.approx(0.4)
    assert not scan.vacuous
    # with the default constant the bound exceeds 1 at n = 5 and every set qualifies
    scan = scan_klr_threshold(scores, 0.4, 0.05, 0.01)
    assert scan.vacuous and scan.threshold == pytest.approx(-0.05)


def test_scan_single_score_is_vacuous():
    scan = scan_klr_threshold([0.7], 0.25, 0.05, 0.02)
    assert scan.eps_n == pytest.approx(4 * math.sqrt(math.log(2)))
    assert scan.vacuous and scan.threshold == -0.05


def test_equal_scores():
    assert threshold_order_statistic(np.full(9, 0.3), 0.25) == 0.3
    scan = scan_klr_threshold(np.full(9, 0.3), 0.25, 0.05, 0.0, eps_constant=0.0)
    assert scan.threshold == pytest.approx(0.25)


def test_scan_without_slack_approaches_quantile():
    rng = np.random.default_rng(0)
    n, alpha = 10_000, 0.3
    s = rng.beta(2, 3, n)
    t_scan = scan_klr_threshold(s, alpha, 0.0, 0.0, eps_constant=0.0).threshold
    t_rank = threshold_order_statistic(s, alpha)
    assert abs(np.mean(s >= t_scan) - np.mean(s >= t_rank)) <= 2 * vc_epsilon(n)
    assert abs(np.mean(s > t_scan) - alpha) <= 1 / n


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0, 1), min_size=1, max_size=50),
    st.floats(0.01, 0.5), st.floats(0.0, 0.4),
    st.floats(0.0, 0.1), st.floats(0.0, 0.1),
)
def test_scan_nonincreasing_in_budget(scores, alpha, d_alpha, gamma, d_gamma):
    base = scan_klr_threshold(scores, alpha, 0.05, gamma, eps_constant=0.3).threshold
    assert scan_klr_threshold(scores, alpha + d_alpha, 0.05, gamma, eps_constant=0.3).threshold <= base
    assert scan_klr_threshold(scores, alpha, 0.05, gamma + d_gamma, eps_constant=0.3).threshold <= base


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]) | st.floats(0, 1), min_size=1, max_size=60),
    st.floats(0.01, 0.9),
    st.floats(0.0, 0.2),
    st.floats(0.0, 0.1),
)
def test_scan_is_the_infimum(scores, alpha, beta, gamma):
    s = np.array(scores)
    scan = scan_klr_threshold(s, alpha, beta, gamma, eps_constant=0.5)
    cut = scan.threshold + beta
    if scan.vacuous:
        assert cut == 0.0
        return
    # the strict upper set at the cut fits, the closed one does not
    assert np.mean(s > cut + 1e-12) <= scan.budget + 1e-12
    assert np.mean(s >= cut - 1e-12) > scan.budget
    assert np.min(np.abs(s - cut)) <= 1e-12


def test_config_from_dict():
    cfg = EstimatorConfig.from_dict({"kernel": {"kind": "Gaussian", "bandwidth": 0.7}, "lambda": 0.01, "beta": 0.1})
    assert (cfg.bandwidth, cfg.lam, cfg.beta) == (0.7, 0.01, 0.1)
    with pytest.raises(InvalidInput):
        EstimatorConfig.from_dict({"betta": 0.1})
    with pytest.raises(InvalidInput):
        EstimatorConfig.from_dict({"kernel": {"kind": "Laplace"}})
    with pytest.raises(InvalidInput):
        EstimatorConfig(beta=-0.1)


def test_histogram_pipeline_recovers_grid_set():
    s1 = load_scenario("S1")
    lab = s1.source.sample_labeled(200_000, seed=1)
    unl = s1.target.sample_unlabeled(200_000, seed=2)
    # at 0.12 the top two points carry exactly the budget, so sampling noise
    # decides whether the next point joins; at 0.11 the rank falls inside an atom
    est = estimate_cdr_set(lab, unl, 0.11, "histogram", domain=s1.domain)
    assert est.provenance is Provenance.ORDER_STATISTIC
    assert est.membership(s1.domain.points).tolist() == [False, False, False, True, True]


def test_klr_pipeline_reports_configuration():
    s3 = load_scenario("S3")
    lab = s3.source.sample_labeled(300, seed=1)
    unl = s3.target.sample_unlabeled(300, seed=2)
    est = estimate_cdr_set(lab, unl, 0.25, "klr")
    assert est.provenance is Provenance.KLR_THRESHOLD
    assert est.config["lambda"] == pytest.approx(300 ** -0.5)
    assert est.config["eps_n"] == pytest.approx(vc_epsilon(300))
    assert est.config["converged"]


def test_klr_pipeline_large_sample_without_slack():
    # with no slack and a large target sample, the KLR set lands near the truth
    s2 = load_scenario("S2")
    lab = s2.source.sample_labeled(1500, seed=5)
    unl = s2.target.sample_unlabeled(50_000, seed=6)
    cfg = EstimatorConfig(beta=0.0, gamma=0.0, eps_constant=0.0)
    est = estimate_cdr_set(lab, unl, 0.25, "klr", cfg)
    rep = evaluate_estimate(s2.source, s2.target, 0.25, est)
    assert rep.sym_diff_risk < 0.05


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.5])
def test_estimate_rejects_bad_alpha(alpha):
    s1 = load_scenario("S1")
    with pytest.raises(InvalidInput):
        estimate_cdr_set(s1.source.sample_labeled(5), s1.target.sample_unlabeled(5), alpha, "histogram",
                         domain=s1.domain)


def test_method_aliases():
    s1 = load_scenario("S1")
    lab, unl = s1.source.sample_labeled(50, seed=1), s1.target.sample_unlabeled(50, seed=2)
    a = estimate_cdr_set(lab, unl, 0.2, "OrderStatistic", domain=s1.domain)
    b = estimate_cdr_set(lab, unl, 0.2, Provenance.ORDER_STATISTIC, domain=s1.domain)
    assert a.threshold == b.threshold == estimate_cdr_set(lab, unl, 0.2, "histogram", domain=s1.domain).threshold


def test_estimate_rejects_unknown_method():
    s1 = load_scenario("S1")
    with pytest.raises(InvalidInput):
        estimate_cdr_set(s1.source.sample_labeled(5), UnlabeledSample(np.zeros((3, 1))), 0.2, "forest")
