"""Risk and diagnostic metrics for estimated discovery sets."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .distributions import JointDistribution
from .oracle import optimal_cdr_set


class EvalMode(str, Enum):
    EXACT = "ExactGrid"
    QUADRATURE = "Quadrature"
    MONTE_CARLO = "MonteCarlo"


CSV_COLUMNS = (
    "scenario",
    "method",
    "m",
    "n",
    "alpha",
    "beta",
    "gamma",
    "seed",
    "sym_diff_risk",
    "power_gap",
    "discovery_rate",
    "size",
    "constraint_violation",
    "mode",
)


def _node_masks(dist: JointDistribution, *sets):
    nv = dist.node_values
    nodes = dist.domain.nodes[nv.support]
    return nv, [np.asarray(s(nodes), dtype=float) > 0.5 for s in sets]


def sym_diff(target: JointDistribution, first, second) -> float:
    """Target-marginal mass of the symmetric difference of two sets.

    Sets are callables returning 0/1 membership (or booleans).
    """
    nv, (a, b) = _node_masks(target, first, second)
    return float(nv.marginal[nv.support][a != b].sum())


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


def mixture_objective(dist: JointDistribution, eps: float, g) -> float:
    """``eps * power + (1 - eps) * (1 - size)`` of a deterministic set."""
    nv, (a,) = _node_masks(dist, g)
    sup = nv.support
    return float(eps * nv.q1[sup][a].sum() + (1 - eps) * (1.0 - nv.q0[sup][a].sum()))


def prop2_bound_check(dist: JointDistribution, eps: float, first, second, slack: float = 1e-12) -> BoundCheck:
    """Check that the mixture objective is Lipschitz in the symmetric-difference risk.

    ``|objective(first) - objective(second)|`` must not exceed
    ``(eps / prior + (1 - eps) / (1 - prior)) * sym_diff``.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    lhs = abs(mixture_objective(dist, eps, first) - mixture_objective(dist, eps, second))
    const = eps / dist.prior + (1 - eps) / (1 - dist.prior)
    rhs = const * sym_diff(dist, first, second)
    return BoundCheck(lhs, rhs, lhs <= rhs + slack)


@dataclass(frozen=True)
class EvalReport:
    """Truth-side metrics of one estimated set."""

    sym_diff_risk: float
    power_gap: float
    discovery_rate: float
    size: float
    constraint_violation: float
    mode: EvalMode
    std_error: float = 0.0
    threshold: float = math.nan
    oracle_threshold: float = math.nan

    def to_row(self, **coords) -> dict:
        """CSV row in the fixed column order; ``coords`` fills scenario..seed."""
        row = {k: coords.get(k, "") for k in CSV_COLUMNS[:8]}
        row.update(
            sym_diff_risk=self.sym_diff_risk,
            power_gap=self.power_gap,
            discovery_rate=self.discovery_rate,
            size=self.size,
            constraint_violation=self.constraint_violation,
            mode=self.mode.value,
        )
        return row

    def as_dict(self) -> dict:
        out = asdict(self)
        out["mode"] = self.mode.value
        return out


def evaluate_estimate(
    source: JointDistribution,
    target: JointDistribution,
    alpha: float,
    estimate,
    mode: EvalMode | str | None = None,
    mc_samples: int = 200_000,
    seed=None,
) -> EvalReport:
    """Compare an estimated set with the optimal set ``{eta_source >= t}`` of target mass ``alpha``.

    Grids are evaluated exactly and boxes by the midpoint rule; Monte Carlo
    uses ``mc_samples`` labeled draws from the target and reports the
    standard error of the risk.
    """
    oracle = optimal_cdr_set(source, target, alpha)
    mode = EvalMode(mode) if mode is not None else (
        EvalMode.EXACT if target.domain.is_grid else EvalMode.QUADRATURE
    )
    if mode is EvalMode.MONTE_CARLO:
        data = target.sample_labeled(mc_samples, seed)
        g = np.asarray(oracle(data.features)) > 0.5
        gh = np.asarray(estimate(data.features)) > 0.5
        pos = data.labels == 1
        diff = g != gh
        risk = float(diff.mean())
        p_gap = (g[pos].mean() - gh[pos].mean()) if pos.any() else 0.0
        size_ = gh[~pos].mean() if (~pos).any() else 0.0
        rate = float(gh.mean())
        se = math.sqrt(max(risk * (1 - risk), 0.0) / mc_samples)
    else:
        nv, (g, gh) = _node_masks(target, oracle, estimate)
        sup = nv.support
        marg, q1, q0 = nv.marginal[sup], nv.q1[sup], nv.q0[sup]
        risk = float(marg[g != gh].sum())
        p_gap = float(q1[g].sum() - q1[gh].sum())
        size_ = float(q0[gh].sum())
        rate = float(marg[gh].sum())
        se = 0.0
    return EvalReport(
        sym_diff_risk=risk,
        power_gap=float(p_gap),
        discovery_rate=rate,
        size=float(size_),
        constraint_violation=max(0.0, rate - alpha),
        mode=mode,
        std_error=se,
        threshold=float(getattr(estimate, "threshold", math.nan)),
        oracle_threshold=float(oracle.threshold),
    )


def sup_threshold_deviation(law, scores) -> float:
    """``sup_t |Q(score >= t) - Qhat(score >= t)|`` for the empirical law of ``scores``.

    ``law`` is the population :class:`~cdrshift.distributions.ScoreLaw`.  The
    empirical upper mass is a step function, so the supremum is attained at
    an observed score, approached from the left or from the right.
    """
    s = np.sort(np.asarray(scores, dtype=float).reshape(-1))
    n = s.size
    uniq, first = np.unique(s, return_index=True)
    emp = (n - first) / n
    emp_next = np.append(emp[1:], 0.0)
    dev_at = np.abs(law.upper(uniq) - emp)
    dev_above = np.abs(law.upper_strict(uniq) - emp_next)
    return float(max(dev_at.max(), dev_above.max()))
