import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from cdrshift.distributions import FeatureDomain, JointDistribution, TablePmf
from cdrshift.exceptions import (
    AssumptionAViolated,
    GridTooLarge,
    InvalidDistribution,
    OutOfRange,
    UnsupportedDomain,
)
from cdrshift.oracle import (
    GnpProblem,
    brute_force_gnp,
    discovery_rate,
    gnp_objective,
    inverse_lambda_gamma_map,
    is_threshold_form,
    lambda_gamma_map,
    likelihood_ratio,
    optimal_cdr_set,
    power,
    size,
    solve_gnp_threshold,
)
from cdrshift.scenarios import load_scenario

from conftest import grid_dist, s2_upper_mass


def test_cdr_threshold_on_five_point_fixture(five_point):
    g = solve_gnp_threshold(five_point, GnpProblem.cdr(five_point, 0.3))
    assert g.threshold == pytest.approx(15 / 43, abs=1e-15)
    assert g.tie_probability == pytest.approx(28 / 43, abs=1e-12)
    assert power(five_point, g) == pytest.approx(0.3 + 7 / 43, abs=1e-12)
    assert discovery_rate(five_point, g) == pytest.approx(0.3, abs=1e-12)


def test_neyman_pearson_linear_program(three_point):
    prob = GnpProblem.neyman_pearson(0.3)
    bf = brute_force_gnp(three_point, prob)
    np.testing.assert_allclose(bf.accept, [0.0, 1 / 3, 1.0], atol=1e-15)
    assert bf.objective == pytest.approx(0.7, abs=1e-15)
    g = solve_gnp_threshold(three_point, prob)
    obj, con = gnp_objective(three_point, prob, g)
    assert obj == pytest.approx(0.7, abs=1e-12)
    assert con == pytest.approx(0.3, abs=1e-12)
    assert size(three_point, g) == pytest.approx(0.3, abs=1e-12)


@st.composite
def gnp_instances(draw):
    k = draw(st.integers(1, 16))
    w0 = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k))) + 1e-3
    w1 = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k))) + 1e-3
    # an occasional tie in the likelihood ratio
    if k > 2 and draw(st.booleans()):
        w0[1], w1[1] = w0[0] * 2, w1[0] * 2
    prior = draw(st.floats(0.02, 0.98))
    theta0 = draw(st.floats(0.0, 0.95))
    theta1 = draw(st.floats(theta0 + 0.01, 1.0))
    alpha = draw(st.floats(0.01, 1.0))
    dist = grid_dist(w0 / w0.sum(), w1 / w1.sum(), prior)
    return dist, GnpProblem(theta0, theta1, alpha)


@settings(max_examples=150, deadline=None)
@given(gnp_instances())
def test_threshold_solution_matches_linear_program(inst):
    dist, prob = inst
    g = solve_gnp_threshold(dist, prob)
    obj, con = gnp_objective(dist, prob, g)
    bf = brute_force_gnp(dist, prob)
    assert obj == pytest.approx(bf.objective, abs=1e-9)
    assert con <= prob.alpha + 1e-9
    assert is_threshold_form(bf.accept, likelihood_ratio(dist, prob))
    if not g.saturated:
        assert g.tie_probability < 1.0


def test_full_budget_accepts_everything(five_point):
    g = solve_gnp_threshold(five_point, GnpProblem.neyman_pearson(1.0))
    assert g.saturated
    np.testing.assert_array_equal(g(five_point.domain.points), 1.0)
    assert power(five_point, g) == pytest.approx(1.0)


@pytest.mark.parametrize("theta0,theta1,alpha", [(0.5, 0.5, 0.1), (0.6, 0.4, 0.1), (0, 1, 0.0), (0, 1, 1.5)])
def test_problem_validation(theta0, theta1, alpha):
    with pytest.raises(InvalidDistribution):
        GnpProblem(theta0, theta1, alpha)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(0.05, 0.1), st.floats(0.0, 1.0))
def test_lambda_gamma_round_trip(theta0, gap, gamma):
    theta1 = min(theta0 + gap, 1.0)
    lam = lambda_gamma_map(theta0, theta1, gamma)
    assert inverse_lambda_gamma_map(theta0, theta1, lam) == pytest.approx(gamma, abs=1e-9)


def test_inverse_lambda_gamma_out_of_range():
    with pytest.raises(OutOfRange):
        inverse_lambda_gamma_map(0.2, 0.8, -1.0)


def test_brute_force_limits():
    pts = np.arange(65, dtype=float)
    big = grid_dist(np.full(65, 1 / 65), np.full(65, 1 / 65), 0.5, pts)
    with pytest.raises(GridTooLarge):
        brute_force_gnp(big, GnpProblem.neyman_pearson(0.1))
    with pytest.raises(UnsupportedDomain):
        brute_force_gnp(load_scenario("S2").target, GnpProblem.neyman_pearson(0.1))


def test_optimal_set_on_grid_is_top_posterior_points():
    s1 = load_scenario("S1")
    g = optimal_cdr_set(s1.source, s1.target, 0.12)
    assert g.threshold == pytest.approx(0.47, abs=1e-12)
    assert g.membership(s1.domain.points).tolist() == [False, False, False, True, True]
    with pytest.raises(AssumptionAViolated):
        optimal_cdr_set(s1.source, s1.target, 0.1)


def test_optimal_set_on_box_matches_closed_form():
    s2 = load_scenario("S2")
    t_true = brentq(lambda t: s2_upper_mass(t) - 0.25, 0.5, 0.999, xtol=1e-14)
    g = optimal_cdr_set(s2.source, s2.target, 0.25)
    assert g.threshold == pytest.approx(t_true, abs=1e-6)
    assert discovery_rate(s2.target, g) == pytest.approx(0.25, abs=1e-6)


def test_neyman_pearson_size_on_box():
    s2 = load_scenario("S2")
    g = solve_gnp_threshold(s2.target, GnpProblem.neyman_pearson(0.1))
    assert size(s2.target, g) == pytest.approx(0.1, abs=1e-6)


def test_zero_null_mass_points_are_free():
    # the middle point has no class-0 mass: NP accepts it at no cost
    dom = FeatureDomain.grid([0.0, 1.0, 2.0])
    d = JointDistribution(dom, 0.5, TablePmf(dom, [0.6, 0.0, 0.4]), TablePmf(dom, [0.2, 0.5, 0.3]))
    prob = GnpProblem.neyman_pearson(0.05)
    bf = brute_force_gnp(d, prob)
    g = solve_gnp_threshold(d, prob)
    assert bf.accept[1] == 1.0
    assert gnp_objective(d, prob, g)[0] == pytest.approx(bf.objective, abs=1e-12)


def test_neyman_pearson_under_one_sided_noise():
    from cdrshift.oracle import classifier_table
    from cdrshift.shifts import apply_ldln

    q = load_scenario("S6").target
    prob = GnpProblem.neyman_pearson(0.25)
    # a constant flip rate on class 0 leaves the class-0 density unchanged
    const = apply_ldln(q, 0.2, 0.0)
    np.testing.assert_allclose(classifier_table(const, solve_gnp_threshold(const, prob)),
                               classifier_table(q, solve_gnp_threshold(q, prob)), atol=1e-12)
    # a posterior-dependent flip rate reweights it, and the optimal classifiers differ
    p = load_scenario("S6").source
    gp = classifier_table(p, solve_gnp_threshold(p, prob))
    gq = classifier_table(q, solve_gnp_threshold(q, prob))
    assert np.max(np.abs(gp - gq)) > 0.1
