import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdrshift.distributions import marginal_score_law
from cdrshift.estimators import Provenance, SetEstimate
from cdrshift.metrics import (
    CSV_COLUMNS,
    EvalMode,
    evaluate_estimate,
    mixture_objective,
    prop2_bound_check,
    sup_threshold_deviation,
    sym_diff,
)
from cdrshift.oracle import optimal_cdr_set
from cdrshift.scenarios import load_scenario

from conftest import grid_dist


def _indicator(points):
    def g(x):
        return np.isin(np.asarray(x)[:, 0], points).astype(float)
    return g


def test_sym_diff_on_grid(five_point):
    a, b = _indicator([0, 1]), _indicator([1, 2, 4])
    assert sym_diff(five_point, a, b) == pytest.approx(0.16 + 0.27 + 0.15)
    assert sym_diff(five_point, a, a) == 0.0


def test_mixture_objective(five_point):
    g = _indicator([0])
    assert mixture_objective(five_point, 0.4, g) == pytest.approx(0.4 * 0.3 + 0.6 * 0.9)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0.01, 1.0), min_size=6, max_size=6),
    st.lists(st.floats(0.01, 1.0), min_size=6, max_size=6),
    st.floats(0.05, 0.95),
    st.floats(0.0, 1.0),
    st.lists(st.booleans(), min_size=6, max_size=6),
    st.lists(st.booleans(), min_size=6, max_size=6),
)
def test_objective_is_lipschitz_in_sym_diff(w0, w1, prior, eps, a, b):
    w0, w1 = np.array(w0), np.array(w1)
    d = grid_dist(w0 / w0.sum(), w1 / w1.sum(), prior)
    check = prop2_bound_check(d, eps, _indicator(np.flatnonzero(a)), _indicator(np.flatnonzero(b)))
    assert check.holds


def test_bound_check_rejects_bad_weight(five_point):
    with pytest.raises(ValueError):
        prop2_bound_check(five_point, 1.5, _indicator([0]), _indicator([1]))


def _as_estimate(level_set):
    return SetEstimate(level_set.score, level_set.threshold, Provenance.ORDER_STATISTIC)


@pytest.mark.parametrize("name", ["S1", "S3"])
def test_oracle_estimate_has_zero_risk(name):
    sc = load_scenario(name)
    est = _as_estimate(optimal_cdr_set(sc.source, sc.target, sc.alpha))
    rep = evaluate_estimate(sc.source, sc.target, sc.alpha, est)
    assert rep.sym_diff_risk == 0.0
    assert rep.power_gap == 0.0
    # box sets are evaluated cell by cell at the midpoints
    assert rep.discovery_rate == pytest.approx(sc.alpha, abs=1e-5)
    assert rep.constraint_violation <= 1e-5
    assert rep.mode is (EvalMode.EXACT if sc.domain.is_grid else EvalMode.QUADRATURE)


def test_monte_carlo_mode_agrees_with_exact():
    s1 = load_scenario("S1")
    est = _as_estimate(optimal_cdr_set(s1.source, s1.target, 0.12))
    est = SetEstimate(est.score, 0.40, Provenance.ORDER_STATISTIC)
    exact = evaluate_estimate(s1.source, s1.target, 0.12, est)
    mc = evaluate_estimate(s1.source, s1.target, 0.12, est, mode="MonteCarlo", mc_samples=100_000, seed=3)
    assert exact.sym_diff_risk == pytest.approx(0.13)
    assert abs(mc.sym_diff_risk - exact.sym_diff_risk) < 4 * mc.std_error
    assert mc.std_error > 0


def test_report_row_layout():
    s1 = load_scenario("S1")
    est = _as_estimate(optimal_cdr_set(s1.source, s1.target, 0.12))
    row = evaluate_estimate(s1.source, s1.target, 0.12, est).to_row(scenario="S1", method="histogram")
    assert tuple(row) == CSV_COLUMNS
    assert row["mode"] == "ExactGrid"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=40))
def test_sup_deviation_matches_brute_force(idx):
    s = np.array([0.1, 0.4, 0.41, 0.47, 0.53])
    mass = np.array([0.75, 0.01, 0.12, 0.10, 0.02])
    s1 = load_scenario("S1")
    law = marginal_score_law(s1.target, s1.source.posterior)
    scores = s1.source.posterior(s1.domain.points[idx])
    got = sup_threshold_deviation(law, scores)
    probes = np.concatenate([s, s + 1e-9, [0.0, 1.0]])
    brute = max(abs(mass[s >= t - 1e-12].sum() - np.mean(scores >= t - 1e-12)) for t in probes)
    assert got == pytest.approx(brute, abs=1e-12)
