"""Plug-in estimators of the optimal discovery set from labeled source data
and unlabeled target data.

Two pipelines are provided:

* ``histogram``: a Laplace-smoothed posterior table on a grid and the
  ``floor(n (1 - alpha))``-th smallest unlabeled score as threshold.
* ``klr``: kernel logistic regression and the conservative threshold
  ``inf{t : Qhat(eta_hat >= t + beta) <= alpha + gamma + eps_n}`` with
  ``eps_n = 4 sqrt(log(n + 1) / n)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .distributions import FeatureDomain, LabeledSample, TIE_TOL, UnlabeledSample
from .exceptions import InvalidInput, RankOutOfRange, UnsupportedDomain
from .klr import KlrModel, fit_klr, resolve_kernel, resolve_lambda

EPS_CONSTANT = 4.0


class Provenance(str, Enum):
    ORDER_STATISTIC = "OrderStatistic"
    KLR_THRESHOLD = "KlrThreshold"


@dataclass(frozen=True, eq=False)
class HistogramPosterior:
    """Posterior table ``(positives + a) / (count + 2a)`` over grid points."""

    domain: FeatureDomain
    table: np.ndarray
    counts: np.ndarray

    def __call__(self, x) -> np.ndarray:
        return self.table[self.domain.index_of(x)]


def fit_posterior_histogram(data: LabeledSample, domain: FeatureDomain, smoothing: float = 1.0) -> HistogramPosterior:
    """Laplace-smoothed per-point label frequencies; unseen points get 1/2."""
    if not domain.is_grid:
        raise UnsupportedDomain("the histogram estimator needs a grid domain")
    idx = domain.index_of(data.features)
    counts = np.bincount(idx, minlength=domain.size).astype(float)
    positives = np.bincount(idx, weights=data.labels, minlength=domain.size)
    table = (positives + smoothing) / (counts + 2 * smoothing)
    return HistogramPosterior(domain, table, counts)


def threshold_order_statistic(scores, alpha: float) -> float:
    """The ``floor(n (1 - alpha))``-th smallest score (1-indexed)."""
    s = np.asarray(scores, dtype=float).reshape(-1)
    n = s.size
    # guard against n * (1 - alpha) landing a hair below an integer
    k = math.floor(n * (1 - alpha) * (1 + 1e-12))
    if not 1 <= k <= n:
        raise RankOutOfRange(f"rank floor(n(1-alpha)) = {k} is outside 1..{n}")
    return float(np.partition(s, k - 1)[k - 1])


def vc_epsilon(n: int, constant: float = EPS_CONSTANT) -> float:
    """Uniform deviation bound ``constant * sqrt(log(n + 1) / n)``."""
    return constant * math.sqrt(math.log(n + 1) / n)


@dataclass(frozen=True)
class ThresholdScan:
    """Result of the conservative threshold rule."""

    threshold: float
    eps_n: float
    budget: float
    admitted: float
    vacuous: bool


def scan_klr_threshold(scores, alpha: float, beta: float, gamma: float, eps_constant: float = EPS_CONSTANT) -> ThresholdScan:
    """``inf{t : Qhat(score >= t + beta) <= alpha + gamma + eps_n}``.

    The search runs over ``s = t + beta >= 0``.  The empirical mass of
    ``{score >= s}`` only drops just above observed scores, so the infimum is
    an observed score minus ``beta``.  When the budget is at least 1 every
    ``s`` qualifies and the result is ``-beta`` (flagged ``vacuous``).
    """
    s = np.sort(np.asarray(scores, dtype=float).reshape(-1))
    n = s.size
    if n < 1:
        raise InvalidInput("need at least one unlabeled score")
    eps = vc_epsilon(n, eps_constant)
    budget = alpha + gamma + eps
    if budget >= 1.0:
        return ThresholdScan(-beta, eps, budget, 1.0, True)
    uniq = np.unique(s)
    above = (n - np.searchsorted(s, uniq, side="right")) / n
    j = int(np.argmax(above <= budget + TIE_TOL))
    return ThresholdScan(float(uniq[j]) - beta, eps, budget, float(above[j]), False)


def threshold_klr(
    model: KlrModel,
    unlabeled: UnlabeledSample,
    alpha: float,
    beta: float,
    gamma: float,
    eps_constant: float = EPS_CONSTANT,
) -> float:
    """Conservative threshold on the fitted posterior of an unlabeled sample."""
    scores = model.predict_posterior(unlabeled.features)
    return scan_klr_threshold(scores, alpha, beta, gamma, eps_constant).threshold


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning knobs of both pipelines.

    ``bandwidth`` is a number or ``"median"``; ``lam`` a number or ``"auto"``
    (``m ** -0.5``).  ``eps_constant`` scales the deviation bound; the
    default 4 is the one the guarantees are stated for.
    """

    beta: float = 0.05
    gamma: float = 0.02
    bandwidth: float | str = "median"
    lam: float | str = "auto"
    tol: float = 1e-8
    max_iter: int = 100
    eps_constant: float = EPS_CONSTANT
    smoothing: float = 1.0

    def __post_init__(self):
        for name in ("beta", "gamma", "eps_constant"):
            if not float(getattr(self, name)) >= 0:
                raise InvalidInput(f"{name} must be non-negative, got {getattr(self, name)}")
        if not self.smoothing > 0 or not self.tol > 0 or int(self.max_iter) < 1:
            raise InvalidInput("smoothing and tol must be positive and max_iter at least 1")

    @classmethod
    def from_dict(cls, data: dict | None) -> "EstimatorConfig":
        data = dict(data or {})
        kernel = data.pop("kernel", None)
        if isinstance(kernel, dict):
            kind = kernel.get("kind", "Gaussian")
            if kind != "Gaussian":
                raise InvalidInput(f"unsupported kernel {kind!r}")
            data.setdefault("bandwidth", kernel.get("bandwidth", "median"))
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidInput(f"unknown estimator option(s): {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SetEstimate:
    """Estimated discovery set ``{score >= threshold}`` with its provenance."""

    score: object
    threshold: float
    provenance: Provenance
    config: dict = field(default_factory=dict)
    model: object = None

    def membership(self, x) -> np.ndarray:
        return np.asarray(self.score(x), dtype=float) >= self.threshold - TIE_TOL

    def __call__(self, x) -> np.ndarray:
        return self.membership(x).astype(float)


METHODS = ("histogram", "klr")
_METHOD_ALIASES = {
    Provenance.ORDER_STATISTIC.value.lower(): "histogram",
    Provenance.KLR_THRESHOLD.value.lower(): "klr",
}


def _method_name(method) -> str:
    name = method.value if isinstance(method, Provenance) else str(method)
    return _METHOD_ALIASES.get(name.lower(), name.lower())


def estimate_cdr_set(
    labeled: LabeledSample,
    unlabeled: UnlabeledSample,
    alpha: float,
    method: str = "klr",
    config: EstimatorConfig | None = None,
    domain: FeatureDomain | None = None,
) -> SetEstimate:
    """Estimate the optimal discovery set at level ``alpha``.

    ``method`` is ``"histogram"`` (alias ``"OrderStatistic"``) or ``"klr"``
    (alias ``"KlrThreshold"``).
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInput(f"alpha must lie in (0, 1), got {alpha}")
    if len(labeled) < 1 or len(unlabeled) < 1:
        raise InvalidInput("need non-empty labeled and unlabeled samples")
    cfg = config or EstimatorConfig()
    method = _method_name(method)
    if method == "histogram":
        if domain is None:
            raise UnsupportedDomain("the histogram estimator needs the grid domain")
        score = fit_posterior_histogram(labeled, domain, cfg.smoothing)
        t = threshold_order_statistic(score(unlabeled.features), alpha)
        return SetEstimate(score, t, Provenance.ORDER_STATISTIC, {"smoothing": cfg.smoothing}, score)
    if method == "klr":
        kernel = resolve_kernel(cfg.bandwidth, labeled.features)
        lam = resolve_lambda(cfg.lam, len(labeled))
        model = fit_klr(labeled, kernel, lam, cfg.tol, cfg.max_iter)
        scan = scan_klr_threshold(model.predict_posterior(unlabeled.features), alpha, cfg.beta, cfg.gamma, cfg.eps_constant)
        info = {
            "beta": cfg.beta,
            "gamma": cfg.gamma,
            "bandwidth": kernel.bandwidth,
            "lambda": lam,
            "eps_n": scan.eps_n,
            "budget": scan.budget,
            "vacuous": scan.vacuous,
            "converged": model.diagnostics.converged,
        }
        return SetEstimate(model.predict_posterior, scan.threshold, Provenance.KLR_THRESHOLD, info, model)
    raise InvalidInput(f"unknown method {method!r}; expected one of {METHODS}")
