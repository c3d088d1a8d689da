"""Population-level optimal classifiers and discovery sets.

The generalized Neyman-Pearson problem maximises the acceptance probability
under the contaminated alternative ``theta1 * q1 + (1 - theta1) * q0`` subject
to acceptance probability at most ``alpha`` under the contaminated null
``theta0 * q1 + (1 - theta0) * q0``.  For ``theta0 < theta1`` the contaminated
likelihood ratio is increasing in the posterior, so the optimum thresholds the
posterior with a randomised tie (:func:`solve_gnp_threshold`).
:func:`brute_force_gnp` solves the same problem on a grid as a fractional
knapsack and serves as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import (
    TIE_TOL,
    JointDistribution,
    Score,
    as_features,
    check_assumption_A,
    score_law,
)
from .exceptions import (
    AssumptionAViolated,
    GridTooLarge,
    InvalidDistribution,
    OutOfRange,
    UnsupportedDomain,
)

MAX_BRUTE_FORCE_POINTS = 64


@dataclass(frozen=True)
class GnpProblem:
    """Contamination levels ``theta0 < theta1`` and size budget ``alpha``.

    ``(0, 1, alpha)`` is the Neyman-Pearson problem and ``(prior, 1, alpha)``
    the controlled-discovery-rate problem.
    """

    theta0: float
    theta1: float
    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.theta0 < self.theta1 <= 1.0):
            raise InvalidDistribution(f"need 0 <= theta0 < theta1 <= 1, got {self.theta0}, {self.theta1}")
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidDistribution(f"alpha must lie in (0, 1], got {self.alpha}")

    @classmethod
    def neyman_pearson(cls, alpha: float) -> "GnpProblem":
        return cls(0.0, 1.0, alpha)

    @classmethod
    def cdr(cls, dist: JointDistribution, alpha: float) -> "GnpProblem":
        return cls(dist.prior, 1.0, alpha)


@dataclass(frozen=True, eq=False)
class ThresholdClassifier:
    """Accept when ``score > threshold``; accept ties with ``tie_probability``.

    ``saturated`` marks the degenerate solution that accepts everything
    (the budget covers the whole null mass); only then ``tie_probability``
    may equal 1.
    """

    score: Score
    threshold: float
    tie_probability: float
    saturated: bool = False

    def __post_init__(self):
        upper = 1.0 if self.saturated else np.nextafter(1.0, 0.0)
        if not 0.0 <= self.tie_probability <= upper:
            raise ValueError(f"tie probability {self.tie_probability} out of range")

    def __call__(self, x) -> np.ndarray:
        s = np.asarray(self.score(x), dtype=float)
        return np.where(
            s > self.threshold + TIE_TOL,
            1.0,
            np.where(s >= self.threshold - TIE_TOL, self.tie_probability, 0.0),
        )


@dataclass(frozen=True, eq=False)
class LevelSet:
    """The set ``{score >= threshold}``."""

    score: Score
    threshold: float

    def membership(self, x) -> np.ndarray:
        return np.asarray(self.score(x), dtype=float) >= self.threshold - TIE_TOL

    def __call__(self, x) -> np.ndarray:
        return self.membership(x).astype(float)


@dataclass(frozen=True, eq=False)
class GridClassifier:
    """Acceptance probabilities tabulated over the points of a grid."""

    domain: object
    accept: np.ndarray
    objective: float = np.nan
    constraint: float = np.nan

    def __call__(self, x) -> np.ndarray:
        return self.accept[self.domain.index_of(x)]


# ---------------------------------------------------------------------------
# integrals


def _integrate(dist: JointDistribution, g, node_mass: np.ndarray) -> float:
    """Integral of the acceptance function ``g`` against ``node_mass``."""
    support = node_mass > 0
    if not dist.domain.is_grid and isinstance(g, (ThresholdClassifier, LevelSet)):
        law = score_law(dist.domain, g.score, node_mass)
        if isinstance(g, LevelSet):
            return float(law.upper(g.threshold))
        return float(law.upper_strict(g.threshold) + g.tie_probability * law.atom_at(g.threshold))
    if not np.any(support):
        return 0.0
    vals = np.asarray(g(dist.domain.nodes[support]), dtype=float)
    return float(vals @ node_mass[support])


def power(dist: JointDistribution, g) -> float:
    """Acceptance probability under the class-1 density."""
    return _integrate(dist, g, dist.node_values.q1)


def size(dist: JointDistribution, g) -> float:
    """Acceptance probability under the class-0 density."""
    return _integrate(dist, g, dist.node_values.q0)


def discovery_rate(dist: JointDistribution, g) -> float:
    """Acceptance probability under the feature marginal."""
    return _integrate(dist, g, dist.node_values.marginal)


def contaminated_masses(dist: JointDistribution, theta0: float, theta1: float):
    """Node masses of the contaminated null and alternative."""
    nv = dist.node_values
    null = theta0 * nv.q1 + (1 - theta0) * nv.q0
    alt = theta1 * nv.q1 + (1 - theta1) * nv.q0
    return null, alt


def contaminated_densities(dist: JointDistribution, theta0: float, theta1: float, x):
    """Contaminated null and alternative densities at ``x``."""
    q0 = dist.density0.pdf(x)
    q1 = dist.density1.pdf(x)
    return theta0 * q1 + (1 - theta0) * q0, theta1 * q1 + (1 - theta1) * q0


def gnp_objective(dist: JointDistribution, problem: GnpProblem, g) -> tuple[float, float]:
    """``(objective, constraint)``: acceptance under the contaminated alternative and null."""
    null, alt = contaminated_masses(dist, problem.theta0, problem.theta1)
    return _integrate(dist, g, alt), _integrate(dist, g, null)


# ---------------------------------------------------------------------------
# threshold map


def lambda_gamma_map(theta0: float, theta1: float, gamma: float) -> float:
    """Contaminated likelihood-ratio threshold for clean ratio ``gamma``."""
    if np.isinf(gamma):
        return np.inf if theta0 == 0 else theta1 / theta0
    return (1 - theta1 + gamma * theta1) / (1 - theta0 + gamma * theta0)


def inverse_lambda_gamma_map(theta0: float, theta1: float, lam: float) -> float:
    """Clean ratio whose contaminated ratio is ``lam``.

    The map sends ``[0, inf]`` onto ``[(1-theta1)/(1-theta0), theta1/theta0]``.
    """
    lo = (1 - theta1) / (1 - theta0) if theta0 < 1 else 0.0
    hi = np.inf if theta0 == 0 else theta1 / theta0
    if not (lo - 1e-15 <= lam <= hi + 1e-15 * max(1.0, abs(hi) if np.isfinite(hi) else 1.0)):
        raise OutOfRange(f"lambda={lam} outside [{lo}, {hi}]")
    if np.isfinite(hi) and lam >= hi:
        return np.inf
    return max((lam * (1 - theta0) - (1 - theta1)) / (theta1 - lam * theta0), 0.0)


# ---------------------------------------------------------------------------
# solvers


def solve_gnp_threshold(dist: JointDistribution, problem: GnpProblem) -> ThresholdClassifier:
    """Optimal classifier in posterior-threshold form.

    ``threshold`` is the smallest ``t`` whose strict upper set has
    contaminated-null mass at most ``alpha``; the tie probability spends the
    rest of the budget on the atom at ``t``.
    """
    null, _ = contaminated_masses(dist, problem.theta0, problem.theta1)
    support = dist.node_values.support
    law = score_law(dist.domain, dist.posterior, np.where(support, null, 0.0))
    if law.total == 0:
        return ThresholdClassifier(dist.posterior, 0.0, 1.0, saturated=True)
    t, q, saturated = law.np_threshold(problem.alpha)
    if saturated:
        # the null mass fits in the budget: accept the whole support
        return ThresholdClassifier(dist.posterior, -np.inf, 1.0, saturated=True)
    return ThresholdClassifier(dist.posterior, t, min(q, np.nextafter(1.0, 0.0)))


def brute_force_gnp(dist: JointDistribution, problem: GnpProblem) -> GridClassifier:
    """Exact linear-programming optimum on a small grid (greedy fractional knapsack)."""
    dom = dist.domain
    if not dom.is_grid:
        raise UnsupportedDomain("brute force needs a grid domain")
    if dom.size > MAX_BRUTE_FORCE_POINTS:
        raise GridTooLarge(f"{dom.size} points exceed the limit of {MAX_BRUTE_FORCE_POINTS}")
    null, alt = contaminated_masses(dist, problem.theta0, problem.theta1)
    accept = np.zeros(dom.size)
    free = (null <= 0) & (alt > 0)
    accept[free] = 1.0
    budget = problem.alpha
    cand = np.flatnonzero((null > 0) & (alt > 0))
    ratio = alt[cand] / null[cand]
    for i in cand[np.argsort(-ratio, kind="stable")]:
        if budget <= 0:
            break
        take = min(1.0, budget / null[i])
        accept[i] = take
        budget -= take * null[i]
    return GridClassifier(dom, accept, float(accept @ alt), float(accept @ null))


def likelihood_ratio(dist: JointDistribution, problem: GnpProblem) -> np.ndarray:
    """Contaminated likelihood ratio at each grid point (inf where the null vanishes)."""
    null, alt = contaminated_masses(dist, problem.theta0, problem.theta1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(null > 0, alt / np.where(null > 0, null, 1.0), np.inf)


def is_threshold_form(accept: np.ndarray, ratio: np.ndarray, tol: float = 1e-12) -> bool:
    """No point with a strictly larger ratio is accepted less than one with a smaller ratio."""
    accept = np.asarray(accept, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    for i in range(len(ratio)):
        worse = ratio < ratio[i] * (1 - 1e-12) if np.isfinite(ratio[i]) else np.isfinite(ratio)
        if accept[i] < 1 - tol and np.any(accept[worse] > tol):
            return False
    return True


def optimal_cdr_set(source: JointDistribution, target: JointDistribution, alpha: float) -> LevelSet:
    """The set ``{eta_source >= t}`` with target-marginal mass exactly ``alpha``."""
    check = check_assumption_A(source, target, alpha)
    if not check.holds:
        raise AssumptionAViolated(check.reason)
    return LevelSet(source.posterior, check.threshold)


def classifier_table(dist: JointDistribution, g: Callable) -> np.ndarray:
    """Acceptance probabilities of ``g`` over the support nodes (0 elsewhere)."""
    nv = dist.node_values
    out = np.zeros(dist.domain.size)
    if np.any(nv.support):
        out[nv.support] = g(dist.domain.nodes[nv.support])
    return out
