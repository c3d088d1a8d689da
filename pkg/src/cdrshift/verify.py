"""Consolidated self-check of the oracle, shifts, metrics and estimators.

:func:`run_verify_suite` returns one row per ``(fixture, property)`` with a
status and the largest error seen.  Extra fixtures (scenario dicts) can be
passed in; one that cannot be built shows up as a failing ``construct`` row.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .distributions import FeatureDomain, JointDistribution, TablePmf, marginal_score_law
from .estimators import vc_epsilon
from .exceptions import CdrError
from .klr import KernelSpec, fit_klr, objective_and_gradient
from .metrics import prop2_bound_check, sup_threshold_deviation
from .oracle import (
    GnpProblem,
    LevelSet,
    brute_force_gnp,
    classifier_table,
    gnp_objective,
    is_threshold_form,
    likelihood_ratio,
    optimal_cdr_set,
    solve_gnp_threshold,
)
from .scenarios import load_scenario, scenario_from_dict
from .shifts import (
    ShiftKind,
    ShiftSpec,
    apply_cspd,
    apply_ldln,
    apply_symmetric_noise,
    lr_scale_map,
    odds_ratio,
    sample_noisy_labels,
)

log = logging.getLogger(__name__)

RUNTIME_BUDGET = 600.0
VERIFY_COLUMNS = ("fixture", "property", "status", "max_error", "detail")


@dataclass(frozen=True)
class CheckRow:
    fixture: str
    property: str
    passed: bool
    max_error: float
    detail: str = ""

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


@dataclass
class VerifyReport:
    rows: list[CheckRow] = field(default_factory=list)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[CheckRow]:
        return [r for r in self.rows if not r.passed]

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(VERIFY_COLUMNS)
            for r in self.rows:
                w.writerow([r.fixture, r.property, r.status, repr(r.max_error), r.detail])

    def format(self) -> str:
        lines = [f"{r.status:<5} {r.fixture:<22} {r.property:<36} {r.max_error:.3e}  {r.detail}" for r in self.rows]
        lines.append(f"{len(self.rows) - len(self.failures())}/{len(self.rows)} checks passed in {self.runtime:.1f}s")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# fixtures


def random_grid_distribution(rng: np.random.Generator, max_points: int = 16) -> JointDistribution:
    """Random table distribution with a few zero masses and repeated posteriors."""
    k = int(rng.integers(2, max_points + 1))
    dom = FeatureDomain.grid(np.arange(k, dtype=float))
    q0 = rng.dirichlet(np.ones(k))
    q1 = rng.dirichlet(np.ones(k))
    if k > 2 and rng.random() < 0.3:
        q0[rng.integers(k)] = 0.0
    if k > 3 and rng.random() < 0.3:
        # duplicate a column so the posterior has a tie
        i, j = rng.choice(k, 2, replace=False)
        q0[j], q1[j] = q0[i], q1[i]
    return JointDistribution(dom, float(rng.uniform(0.05, 0.95)), TablePmf(dom, q0 / q0.sum()), TablePmf(dom, q1 / q1.sum()))


def random_problem(rng: np.random.Generator) -> GnpProblem:
    theta0 = float(rng.uniform(0.0, 0.9)) if rng.random() < 0.8 else 0.0
    theta1 = float(rng.uniform(theta0 + 0.01, 1.0)) if rng.random() < 0.7 else 1.0
    return GnpProblem(theta0, theta1, float(rng.uniform(0.01, 0.99)))


def base_grid() -> JointDistribution:
    """The unshifted seven-point grid shared by the grid shift scenarios."""
    return load_scenario("S4").target


# ---------------------------------------------------------------------------
# individual checks


def check_threshold_optimality(count: int = 200, seed: int = 0) -> list[CheckRow]:
    rng = np.random.default_rng(seed)
    gap = 0.0
    excess = 0.0
    non_threshold = 0
    for _ in range(count):
        dist = random_grid_distribution(rng)
        prob = random_problem(rng)
        g = solve_gnp_threshold(dist, prob)
        lp = brute_force_gnp(dist, prob)
        obj, con = gnp_objective(dist, prob, g)
        gap = max(gap, abs(obj - lp.objective))
        excess = max(excess, con - prob.alpha)
        if not is_threshold_form(lp.accept, likelihood_ratio(dist, prob)):
            non_threshold += 1
        if not is_threshold_form(classifier_table(dist, g), likelihood_ratio(dist, prob)):
            non_threshold += 1
    return [
        CheckRow("random_grids", "threshold_solver_matches_lp", gap <= 1e-9, gap, f"{count} fixtures"),
        CheckRow("random_grids", "threshold_solver_feasible", excess <= 1e-12, max(excess, 0.0)),
        CheckRow("random_grids", "lp_optimum_threshold_form", non_threshold == 0, float(non_threshold)),
    ]


def level_set_disagreement(source: JointDistribution, target: JointDistribution, alpha: float,
                           probes: int = 10_000, tol: float = 1e-6) -> tuple[float, int]:
    """Compare ``optimal_cdr_set(source, target)`` with ``optimal_cdr_set(target, target)``.

    On a grid this is the target mass of the symmetric difference.  On a box
    it counts probe points classified differently, ignoring probes within
    ``tol`` of either threshold.
    """
    g_p = optimal_cdr_set(source, target, alpha)
    g_q = optimal_cdr_set(target, target, alpha)
    dom = target.domain
    if dom.is_grid:
        nv = target.node_values
        x = dom.points[nv.support]
        diff = g_p.membership(x) != g_q.membership(x)
        return float(nv.marginal[nv.support][diff].sum()), int(diff.sum())
    lo, hi = dom.bounds[0]
    x = np.linspace(lo, hi, probes)[:, None]
    s_p, s_q = source.posterior(x), target.posterior(x)
    near = (np.abs(s_p - g_p.threshold) <= tol) | (np.abs(s_q - g_q.threshold) <= tol)
    diff = (s_p >= g_p.threshold) != (s_q >= g_q.threshold)
    bad = diff & ~near
    return float(bad.mean()), int(bad.sum())


def check_immunity(names=("S3", "S4", "S5", "S6"), alphas=(0.1, 0.25, 0.5)) -> list[CheckRow]:
    rows = []
    for name in names:
        sc = load_scenario(name)
        worst, count = 0.0, 0
        for a in alphas:
            err, c = level_set_disagreement(sc.source, sc.target, a)
            worst, count = max(worst, err), count + c
        rows.append(CheckRow(name, "cdr_set_immune_to_shift", count == 0, worst, f"alphas={list(alphas)}"))
    return rows


def noisy_label_zscores(target: JointDistribution, noise: ShiftSpec, eta_source: np.ndarray,
                        count: int = 100_000, seed: int = 0) -> np.ndarray:
    """Per grid point z-score of the noisy label frequency against ``eta_source``."""
    data = sample_noisy_labels(target, noise, count, seed)
    idx = target.domain.index_of(data.features)
    n_i = np.bincount(idx, minlength=target.domain.size)
    k_i = np.bincount(idx, weights=data.labels, minlength=target.domain.size)
    seen = n_i > 0
    p = eta_source[seen]
    sd = np.sqrt(np.maximum(p * (1 - p), 1e-300) / n_i[seen])
    return (k_i[seen] / n_i[seen] - p) / sd


def check_noise_identities(count: int = 100_000, seed: int = 0) -> list[CheckRow]:
    q = base_grid()
    x = q.domain.points
    eta_q = q.posterior(x)
    rows = []
    cases = [
        ("ldln(0.1,0.2)", ShiftSpec(ShiftKind.LDLN, {"rho0": 0.1, "rho1": 0.2}),
         apply_ldln(q, 0.1, 0.2), (1 - 0.1 - 0.2) * eta_q + 0.1),
        ("symmetric(0.15)", ShiftSpec(ShiftKind.SYMMETRIC, {"nu": 0.15}),
         apply_symmetric_noise(q, 0.15), 0.5 + (1 - 2 * 0.15) * (eta_q - 0.5)),
        ("one_sided(u/2)", ShiftSpec(ShiftKind.ONE_SIDED, {"psi": "affine(0.5,0)"}),
         ShiftSpec(ShiftKind.ONE_SIDED, {"psi": "affine(0.5,0)"}).apply(q), 1 - (1 - eta_q / 2) * (1 - eta_q)),
    ]
    for i, (name, spec, p, expected) in enumerate(cases):
        eta_p = p.posterior(x)
        err = float(np.max(np.abs(eta_p - expected)))
        rows.append(CheckRow(name, "posterior_identity", err <= 1e-12, err))
        z = noisy_label_zscores(q, spec, eta_p, count, seed + i)
        zmax = float(np.max(np.abs(z)))
        rows.append(CheckRow(name, "noisy_label_frequency_4sigma", zmax <= 4.0, zmax, f"n={count}"))
    # odds scaling under a change of class prior
    p = ShiftSpec(ShiftKind.TARGET, {"new_prior": 0.25}).apply(q)
    err = float(np.max(np.abs(p.posterior(x) - lr_scale_map(odds_ratio(0.25, q.prior))(eta_q))))
    rows.append(CheckRow("target_shift(0.25)", "posterior_identity", err <= 1e-12, err))
    # composing two shifts gives the composed posterior map
    marg = q.marginal_density()
    new_marg = TablePmf(q.domain, np.full(q.domain.size, 1.0 / q.domain.size))
    p1 = apply_cspd(q, "lr_scale(3)", new_marg)
    p2 = apply_ldln(p1, 0.05, 0.1)
    expected = 0.85 * lr_scale_map(3.0)(eta_q) + 0.05
    err = float(np.max(np.abs(p2.posterior(x) - expected)))
    rows.append(CheckRow("cspd_then_ldln", "composition_closure", err <= 1e-12, err))
    spec = ShiftSpec(ShiftKind.COMPOSITION, parts=(
        ShiftSpec(ShiftKind.CSPD, {"phi": "lr_scale(3)", "new_marginal": new_marg}),
        ShiftSpec(ShiftKind.LDLN, {"rho0": 0.05, "rho1": 0.1}),
    ))
    err2 = float(np.max(np.abs(spec.posterior_map(q)(eta_q) - expected)))
    rows.append(CheckRow("cspd_then_ldln", "composed_map_identity", err2 <= 1e-12, err2))
    del marg
    return rows


def check_null_contamination_immunity() -> list[CheckRow]:
    """Neyman-Pearson (theta0 = 0) under one-sided noise.

    With a constant flip rate the class-0 density is unchanged and the
    optimal classifiers coincide.  With a flip rate that depends on the
    posterior, the class-0 density is reweighted by ``1 - psi(eta)`` and the
    classifiers differ; the row passes when that reweighting is confirmed.
    """
    q = base_grid()
    x = q.domain.points
    rows = []
    const = apply_ldln(q, 0.2, 0.0)
    worst = 0.0
    for a in (0.1, 0.25, 0.5):
        prob = GnpProblem.neyman_pearson(a)
        gp = classifier_table(const, solve_gnp_threshold(const, prob))
        gq = classifier_table(q, solve_gnp_threshold(q, prob))
        worst = max(worst, float(np.max(np.abs(gp - gq))))
    rows.append(CheckRow("one_sided_constant(0.2)", "np_classifier_immune", worst <= 1e-12, worst))

    spec = ShiftSpec(ShiftKind.ONE_SIDED, {"psi": "affine(0.5,0)"})
    p = spec.apply(q)
    eta_q = q.posterior(x)
    w = 1 - eta_q / 2
    expected = w * q.node_values.q0 / float(w @ q.node_values.q0)
    err = float(np.max(np.abs(p.node_values.q0 - expected)))
    rows.append(CheckRow("one_sided(u/2)", "class0_reweighted_by_1_minus_psi", err <= 1e-12, err))
    return rows


def check_prop2(names=("S1", "S4", "S2"), pairs: int = 500, seed: int = 0) -> list[CheckRow]:
    rng = np.random.default_rng(seed)
    rows = []
    for name in names:
        q = load_scenario(name).target
        worst = -np.inf
        violations = 0
        for _ in range(pairs):
            a, b = _random_set(rng, q), _random_set(rng, q)
            res = prop2_bound_check(q, float(rng.uniform()), a, b)
            worst = max(worst, res.lhs - res.rhs)
            violations += not res.holds
        rows.append(CheckRow(name, "mixture_objective_lipschitz", violations == 0, max(worst, 0.0),
                             f"{pairs} pairs, {violations} violations"))
    return rows


def _random_set(rng: np.random.Generator, dist: JointDistribution) -> Callable:
    dom = dist.domain
    if dom.is_grid:
        table = rng.random(dom.size) < rng.uniform(0.1, 0.9)
        return lambda x: table[dom.index_of(x)].astype(float)
    lo, hi = sorted(rng.uniform(dom.bounds[0, 0], dom.bounds[0, 1], 2))
    if rng.random() < 0.5:
        return lambda x: ((x[:, 0] >= lo) & (x[:, 0] <= hi)).astype(float)
    return LevelSet(dist.posterior, float(rng.uniform()))


def gradient_errors(states: int = 50, m: int = 30, seed: int = 0, step: float = 1e-5) -> np.ndarray:
    """Relative error of the analytic gradient against central differences."""
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(states):
        x = rng.normal(size=(m, 2))
        y = rng.integers(0, 2, m)
        gram = KernelSpec(float(rng.uniform(0.5, 2.0))).gram(x, x)
        lam = float(rng.uniform(0.01, 1.0))
        c = rng.normal(scale=0.5, size=m)
        _, g = objective_and_gradient(c, gram, y, lam)
        fd = np.empty(m)
        for i in range(m):
            e = np.zeros(m)
            e[i] = step
            fd[i] = (objective_and_gradient(c + e, gram, y, lam)[0]
                     - objective_and_gradient(c - e, gram, y, lam)[0]) / (2 * step)
        errs.append(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-300))
    return np.array(errs)


def convexity_gaps(triples: int = 100, m: int = 30, seed: int = 1) -> np.ndarray:
    """``J(t a + (1-t) b) - t J(a) - (1-t) J(b)``; non-positive for a convex objective."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(m, 2))
    y = rng.integers(0, 2, m)
    gram = KernelSpec(1.0).gram(x, x)
    out = []
    for _ in range(triples):
        a, b = rng.normal(size=m), rng.normal(size=m)
        t = float(rng.uniform())
        j = lambda c: objective_and_gradient(c, gram, y, 0.1)[0]  # noqa: E731
        out.append(j(t * a + (1 - t) * b) - t * j(a) - (1 - t) * j(b))
    return np.array(out)


def check_klr_numerics() -> list[CheckRow]:
    errs = gradient_errors()
    gaps = convexity_gaps()
    q = load_scenario("S2").target
    fit = fit_klr(q.sample_labeled(400, 0))
    steps = np.diff(fit.diagnostics.objective_history)
    worst_step = float(steps.max()) if steps.size else -1.0
    return [
        CheckRow("klr", "gradient_vs_central_differences", errs.max() <= 1e-5, float(errs.max()), "50 states"),
        CheckRow("klr", "objective_convex", gaps.max() <= 1e-12, float(max(gaps.max(), 0.0)), "100 triples"),
        CheckRow("klr", "newton_strict_descent", worst_step < 0 and fit.diagnostics.converged, max(worst_step, 0.0),
                 f"{fit.diagnostics.iterations} iterations"),
    ]


def check_uniform_deviation(replicates: int = 200, n: int = 2000, seed: int = 0) -> list[CheckRow]:
    """Deviation of the empirical upper-set masses of the true source posterior."""
    sc = load_scenario("S3")
    law = marginal_score_law(sc.target, sc.source.posterior)
    eps = vc_epsilon(n)
    devs = []
    for child in np.random.SeedSequence(seed).spawn(replicates):
        x = sc.target.sample_unlabeled(n, child).features
        devs.append(sup_threshold_deviation(law, sc.source.posterior(x)))
    devs = np.array(devs)
    freq = float(np.mean(devs <= eps))
    return [CheckRow("S3", "uniform_deviation_within_eps_n", freq >= 1 - 1 / n, float(devs.max()),
                     f"frequency {freq:.4f}, eps_n={eps:.4f}")]


def check_oracle_continuous() -> list[CheckRow]:
    q = load_scenario("S2").target
    rows = []
    worst = 0.0
    for a in (0.1, 0.25):
        g = solve_gnp_threshold(q, GnpProblem.neyman_pearson(a))
        _, con = gnp_objective(q, GnpProblem.neyman_pearson(a), g)
        worst = max(worst, abs(con - a))
    rows.append(CheckRow("S2", "np_size_exact", worst <= 1e-6, worst))
    return rows


def check_fixture(data: dict) -> list[CheckRow]:
    name = data.get("name", "fixture")
    try:
        sc = scenario_from_dict(data)
    except CdrError as exc:
        return [CheckRow(name, "construct", False, math.nan, f"{type(exc).__name__}: {exc}")]
    rows = [CheckRow(name, "construct", True, 0.0)]
    try:
        err, count = level_set_disagreement(sc.source, sc.target, sc.alpha)
        rows.append(CheckRow(name, "cdr_set_immune_to_shift", count == 0, err))
    except CdrError as exc:
        rows.append(CheckRow(name, "cdr_set_immune_to_shift", False, math.nan, f"{type(exc).__name__}: {exc}"))
    return rows


def run_verify_suite(fixtures: Iterable[dict] = (), quick: bool = False) -> VerifyReport:
    """Run every self-check; ``quick`` shrinks replicate counts."""
    start = time.perf_counter()
    report = VerifyReport()
    steps = [
        lambda: check_threshold_optimality(60 if quick else 200),
        check_immunity,
        lambda: check_noise_identities(20_000 if quick else 100_000),
        check_null_contamination_immunity,
        lambda: check_prop2(pairs=100 if quick else 500),
        check_oracle_continuous,
        check_klr_numerics,
        lambda: check_uniform_deviation(40 if quick else 200),
    ]
    for step in steps:
        report.rows.extend(step())
    for data in fixtures:
        report.rows.extend(check_fixture(data))
    report.runtime = time.perf_counter() - start
    if report.runtime > RUNTIME_BUDGET:
        log.warning("verification took %.0fs, over the %.0fs budget", report.runtime, RUNTIME_BUDGET)
    return report
