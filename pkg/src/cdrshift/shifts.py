"""Domain-shift constructions that turn a target distribution into a source.

Every shift here keeps the ranking of the target posterior: the source
posterior is ``phi(eta_target)`` for an increasing map ``phi``.  The shifted
distribution is built from its marginal and posterior, so grid results stay
exact tables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .distributions import (
    Density,
    JointDistribution,
    LabeledSample,
    ReweightedDensity,
    TablePmf,
    _check_count,
)
from .exceptions import (
    DegeneratePrior,
    InvalidDistribution,
    InvalidInput,
    NoiseTooLarge,
    NonMonotoneMap,
    OutOfRange,
    SupportViolation,
    ZeroMarginalDensity,
)

PRIOR_FLOOR = 1e-9
_MONO_GRID = np.linspace(0.0, 1.0, 1001)


@dataclass(frozen=True, eq=False)
class MonotoneMap:
    """A named map from [0, 1] to [0, 1]."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]

    def __call__(self, u):
        return self.func(np.asarray(u, dtype=float))

    def inverse(self, v, tol: float = 1e-14):
        """Preimage by vectorised bisection; raises if ``v`` is outside the range."""
        v = np.asarray(v, dtype=float)
        lo_v, hi_v = float(self(0.0)), float(self(1.0))
        if np.any(v < lo_v - 1e-12) or np.any(v > hi_v + 1e-12):
            raise OutOfRange(f"value outside the range [{lo_v:.6g}, {hi_v:.6g}] of {self.name}")
        lo, hi = np.zeros(v.shape), np.ones(v.shape)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            below = self(mid) < v
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= tol):
                break
        return 0.5 * (lo + hi)

    def then(self, outer: "MonotoneMap") -> "MonotoneMap":
        """The composition ``outer(self(u))``."""
        return MonotoneMap(f"{outer.name}.{self.name}", lambda u: outer(self(u)))


def check_increasing(phi: Callable, name: str = "map", strict: bool = True) -> None:
    """Validate monotonicity and range on a 1001-point grid of [0, 1]."""
    vals = np.asarray(phi(_MONO_GRID), dtype=float)
    if np.any(~np.isfinite(vals)) or np.any(vals < -1e-12) or np.any(vals > 1 + 1e-12):
        raise NonMonotoneMap(f"{name} does not map [0, 1] into [0, 1]")
    steps = np.diff(vals)
    bad = steps <= 0 if strict else steps < -1e-15
    if np.any(bad):
        u = _MONO_GRID[np.flatnonzero(bad)[0]]
        kind = "strictly increasing" if strict else "non-decreasing"
        raise NonMonotoneMap(f"{name} is not {kind} near u={u:.3f}")


def identity_map() -> MonotoneMap:
    return MonotoneMap("identity", lambda u: u)


def affine_map(a: float, b: float) -> MonotoneMap:
    return MonotoneMap(f"affine({a:g},{b:g})", lambda u: a * u + b)


def lr_scale_map(r: float) -> MonotoneMap:
    """Multiply the posterior odds by ``r``."""
    if not r > 0:
        raise NonMonotoneMap("odds scale must be positive")
    return MonotoneMap(f"lr_scale({r:g})", lambda u: r * u / (r * u + 1.0 - u))


def cusp_map(c: float) -> MonotoneMap:
    """Increasing map with a square-root cusp at ``c``, fixing 0, ``c`` and 1.

    Its inverse is quadratic around ``c``, so a continuous score law becomes
    one whose CDF grows quadratically on both sides of ``c``.
    """
    if not 0.0 < c < 1.0:
        raise NonMonotoneMap("cusp location must lie in (0, 1)")

    def func(u):
        below = c - c * np.sqrt(np.clip((c - u) / c, 0.0, None))
        above = c + (1 - c) * np.sqrt(np.clip((u - c) / (1 - c), 0.0, None))
        return np.where(u < c, below, above)

    return MonotoneMap(f"cusp({c:g})", func)


def square_map() -> MonotoneMap:
    return MonotoneMap("square", lambda u: u * u)


_NAMED = {
    "identity": (0, lambda: identity_map()),
    "square": (0, lambda: square_map()),
    "affine": (2, affine_map),
    "lr_scale": (1, lr_scale_map),
    "cusp": (1, cusp_map),
}


def parse_map(spec: str | MonotoneMap) -> MonotoneMap:
    """Parse ``identity``, ``square``, ``affine(a,b)``, ``lr_scale(r)`` or ``cusp(c)``."""
    if isinstance(spec, MonotoneMap):
        return spec
    m = re.fullmatch(r"\s*([a-z_]+)\s*(?:\((.*)\))?\s*", str(spec))
    if not m or m.group(1) not in _NAMED:
        raise InvalidInput(f"unknown posterior map {spec!r}")
    arity, build = _NAMED[m.group(1)]
    args = [float(a) for a in m.group(2).split(",")] if m.group(2) else []
    if len(args) != arity:
        raise InvalidInput(f"{m.group(1)} takes {arity} argument(s), got {len(args)}")
    return build(*args)


def odds_ratio(p_new: float, p_old: float) -> float:
    return (p_new / (1 - p_new)) / (p_old / (1 - p_old))


# ---------------------------------------------------------------------------
# building a distribution from its marginal and posterior


def _check_prior(prior: float) -> float:
    if not (PRIOR_FLOOR <= prior <= 1 - PRIOR_FLOOR):
        raise DegeneratePrior(f"derived class prior {prior:.3g} is degenerate")
    return float(prior)


def from_marginal_posterior(
    domain,
    marginal: Density,
    eta: Callable[[np.ndarray], np.ndarray],
    name: str = "",
) -> JointDistribution:
    """Joint distribution with the given feature marginal and posterior."""
    if domain.is_grid:
        m = marginal.pdf(domain.points)
        e = np.zeros_like(m)
        on = m > 0
        e[on] = np.clip(eta(domain.points[on]), 0.0, 1.0)
        z1, z0 = float(m @ e), float(m @ (1 - e))
        prior = _check_prior(z1 / (z0 + z1))
        return JointDistribution(
            domain, prior, TablePmf(domain, m * (1 - e) / z0), TablePmf(domain, m * e / z1), name
        )
    w = domain.weights
    m = marginal.pdf(domain.nodes)
    e = np.clip(eta(domain.nodes), 0.0, 1.0)
    z1, z0 = float(np.sum(m * e * w)), float(np.sum(m * (1 - e) * w))
    prior = _check_prior(z1 / (z0 + z1))

    def w1(x):
        return np.clip(eta(x), 0.0, 1.0)

    def w0(x):
        return 1.0 - np.clip(eta(x), 0.0, 1.0)

    return JointDistribution(
        domain,
        prior,
        ReweightedDensity(marginal, w0, z0),
        ReweightedDensity(marginal, w1, z1),
        name,
    )


def _check_support(target: JointDistribution, new_marginal: Density) -> None:
    nodes = target.domain.nodes
    w = target.domain.weights
    old = target.node_values.marginal
    new = new_marginal.pdf(nodes) * w
    lost = (old > 0) & (new <= 0)
    if np.any(lost):
        x = nodes[np.flatnonzero(lost)[0]]
        raise SupportViolation(f"new marginal vanishes at {x.tolist()} where the target marginal is positive")
    undefined = (new > 0) & (old <= 0)
    if np.any(undefined):
        x = nodes[np.flatnonzero(undefined)[0]]
        raise ZeroMarginalDensity(f"target posterior undefined at {x.tolist()} charged by the new marginal")


# ---------------------------------------------------------------------------
# shift constructions


def apply_covariate_shift(target: JointDistribution, new_marginal: Density) -> JointDistribution:
    """Same posterior, new feature marginal."""
    _check_support(target, new_marginal)
    return from_marginal_posterior(target.domain, new_marginal, target.posterior, "covariate-shift")


def apply_posterior_drift(target: JointDistribution, phi) -> JointDistribution:
    """Same feature marginal, posterior ``phi(eta_target)``."""
    phi = parse_map(phi)
    check_increasing(phi, phi.name)
    return from_marginal_posterior(
        target.domain, target.marginal_density(), lambda x: phi(target.posterior(x)), "posterior-drift"
    )


def apply_cspd(target: JointDistribution, phi, new_marginal: Density) -> JointDistribution:
    """New feature marginal and posterior ``phi(eta_target)``."""
    phi = parse_map(phi)
    check_increasing(phi, phi.name)
    _check_support(target, new_marginal)
    return from_marginal_posterior(
        target.domain, new_marginal, lambda x: phi(target.posterior(x)), "cspd"
    )


def apply_target_shift(target: JointDistribution, new_prior: float) -> JointDistribution:
    """Same class-conditionals, new class prior."""
    if not 0.0 < new_prior < 1.0:
        raise DegeneratePrior(f"new prior must lie in (0, 1), got {new_prior}")
    _check_prior(new_prior)
    return JointDistribution(target.domain, new_prior, target.density0, target.density1, "target-shift")


def target_shift_map(target: JointDistribution, new_prior: float) -> MonotoneMap:
    return lr_scale_map(odds_ratio(new_prior, target.prior))


def _check_flip_rates(rho0: float, rho1: float) -> None:
    if rho0 < 0 or rho1 < 0:
        raise InvalidDistribution("flip rates must be non-negative")
    if rho0 + rho1 >= 1:
        raise NoiseTooLarge(f"rho0 + rho1 = {rho0 + rho1:g} >= 1 leaves no signal")


def ldln_map(rho0: float, rho1: float) -> MonotoneMap:
    """Posterior map induced by flipping label ``i`` with probability ``rho_i``."""
    _check_flip_rates(rho0, rho1)
    return MonotoneMap(f"ldln({rho0:g},{rho1:g})", lambda u: (1 - rho0 - rho1) * u + rho0)


def apply_ldln(target: JointDistribution, rho0: float, rho1: float) -> JointDistribution:
    """Label-dependent noise: a label ``i`` is flipped with probability ``rho_i``."""
    return apply_posterior_drift(target, ldln_map(rho0, rho1))


def symmetric_noise_map(nu: float) -> MonotoneMap:
    if nu < 0:
        raise InvalidDistribution("flip rate must be non-negative")
    if nu >= 0.5:
        raise NoiseTooLarge(f"flip rate {nu:g} >= 1/2 leaves no signal")
    return MonotoneMap(f"symmetric({nu:g})", lambda u: (1 - 2 * nu) * u + nu)


def apply_symmetric_noise(target: JointDistribution, nu: float) -> JointDistribution:
    return apply_posterior_drift(target, symmetric_noise_map(nu))


def one_sided_map(psi) -> MonotoneMap:
    """``u -> 1 - (1 - psi(u)) (1 - u)``: label 0 flips with probability ``psi(eta)``."""
    psi = parse_map(psi)
    check_increasing(psi, psi.name, strict=False)
    if float(np.max(psi(_MONO_GRID))) >= 1.0:
        raise NoiseTooLarge("psi must stay below 1")
    return MonotoneMap(f"one_sided({psi.name})", lambda u: 1.0 - (1.0 - psi(u)) * (1.0 - u))


def apply_one_sided_pd(target: JointDistribution, psi) -> JointDistribution:
    """Labels 1 are never flipped; labels 0 flip with probability ``psi(eta)``."""
    return apply_posterior_drift(target, one_sided_map(psi))


# ---------------------------------------------------------------------------
# shift specifications


class ShiftKind(str, Enum):
    COVARIATE = "CovariateShift"
    POSTERIOR_DRIFT = "PosteriorDrift"
    CSPD = "CSPD"
    TARGET = "TargetShift"
    LDLN = "LDLN"
    SYMMETRIC = "SymmetricNoise"
    ONE_SIDED = "OneSidedPD"
    COMPOSITION = "Composition"


_ALIASES = {
    "cs": ShiftKind.COVARIATE,
    "pd": ShiftKind.POSTERIOR_DRIFT,
    "pd'": ShiftKind.ONE_SIDED,
    "pdprime": ShiftKind.ONE_SIDED,
    **{k.value.lower(): k for k in ShiftKind},
}


@dataclass(frozen=True, eq=False)
class ShiftSpec:
    """Declarative description of a shift, as found in scenario files.

    ``params`` holds the kind-specific fields (``phi``, ``new_marginal``,
    ``new_prior``, ``rho0``, ``rho1``, ``nu``, ``psi``); ``parts`` lists the
    steps of a composition in the order they are applied.
    """

    kind: ShiftKind
    params: dict = field(default_factory=dict)
    parts: tuple["ShiftSpec", ...] = ()

    @classmethod
    def from_dict(cls, data: dict, density_parser=None) -> "ShiftSpec":
        raw = str(data["kind"])
        kind = _ALIASES.get(raw.lower())
        if kind is None:
            raise InvalidInput(f"unknown shift kind {raw!r}")
        params = {k: v for k, v in data.items() if k not in ("kind", "parts")}
        if "new_marginal" in params and density_parser is not None:
            params["new_marginal"] = density_parser(params["new_marginal"])
        parts = tuple(cls.from_dict(p, density_parser) for p in data.get("parts", ()))
        if kind is ShiftKind.COMPOSITION and not parts:
            raise InvalidInput("a composition needs at least one part")
        return cls(kind, params, parts)

    def posterior_map(self, target: JointDistribution) -> MonotoneMap:
        """``phi`` with ``eta_source = phi(eta_target)`` for this shift."""
        p = self.params
        k = self.kind
        if k is ShiftKind.COVARIATE:
            return identity_map()
        if k in (ShiftKind.POSTERIOR_DRIFT, ShiftKind.CSPD):
            return parse_map(p.get("phi", "identity"))
        if k is ShiftKind.TARGET:
            return target_shift_map(target, float(p["new_prior"]))
        if k is ShiftKind.LDLN:
            return ldln_map(float(p.get("rho0", 0.0)), float(p.get("rho1", 0.0)))
        if k is ShiftKind.SYMMETRIC:
            return symmetric_noise_map(float(p["nu"]))
        if k is ShiftKind.ONE_SIDED:
            return one_sided_map(p.get("psi", "identity"))
        phi, current = identity_map(), target
        for part in self.parts:
            phi = phi.then(part.posterior_map(current))
            current = part.apply(current)
        return phi

    def apply(self, target: JointDistribution) -> JointDistribution:
        p = self.params
        k = self.kind
        if k is ShiftKind.COVARIATE:
            return apply_covariate_shift(target, p["new_marginal"])
        if k is ShiftKind.POSTERIOR_DRIFT:
            return apply_posterior_drift(target, p.get("phi", "identity"))
        if k is ShiftKind.CSPD:
            return apply_cspd(target, p.get("phi", "identity"), p["new_marginal"])
        if k is ShiftKind.TARGET:
            return apply_target_shift(target, float(p["new_prior"]))
        if k is ShiftKind.LDLN:
            return apply_ldln(target, float(p.get("rho0", 0.0)), float(p.get("rho1", 0.0)))
        if k is ShiftKind.SYMMETRIC:
            return apply_symmetric_noise(target, float(p["nu"]))
        if k is ShiftKind.ONE_SIDED:
            return apply_one_sided_pd(target, p.get("psi", "identity"))
        current = target
        for part in self.parts:
            current = part.apply(current)
        return current

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        for key, val in self.params.items():
            out[key] = val.to_dict() if isinstance(val, Density) else val
        if self.parts:
            out["parts"] = [part.to_dict() for part in self.parts]
        return out


def flip_probabilities(target: JointDistribution, spec: ShiftSpec, sample: LabeledSample) -> np.ndarray:
    """Per-example probability that the clean label is flipped."""
    y = sample.labels
    p = spec.params
    if spec.kind is ShiftKind.LDLN:
        rho0, rho1 = float(p.get("rho0", 0.0)), float(p.get("rho1", 0.0))
        _check_flip_rates(rho0, rho1)
        return np.where(y == 1, rho1, rho0)
    if spec.kind is ShiftKind.SYMMETRIC:
        nu = float(p["nu"])
        symmetric_noise_map(nu)
        return np.full(len(y), nu)
    if spec.kind is ShiftKind.ONE_SIDED:
        psi = parse_map(p.get("psi", "identity"))
        one_sided_map(psi)
        rho0 = psi(target.posterior(sample.features))
        return np.where(y == 1, 0.0, rho0)
    raise InvalidInput(f"{spec.kind.value} is not a label-noise model")


def sample_noisy_labels(
    target: JointDistribution,
    noise: ShiftSpec,
    count: int,
    seed=None,
    return_clean: bool = False,
):
    """Draw clean pairs from ``target`` and flip labels under ``noise``.

    Returns the noisy :class:`LabeledSample`, or ``(noisy, clean_labels)``
    when ``return_clean`` is set.
    """
    count = _check_count(count)
    clean_seed, flip_seed = np.random.SeedSequence(seed).spawn(2)
    clean = target.sample_labeled(count, clean_seed)
    rho = flip_probabilities(target, noise, clean)
    flips = np.random.default_rng(flip_seed).random(count) < rho
    noisy = LabeledSample(clean.features, np.where(flips, 1 - clean.labels, clean.labels))
    return (noisy, clean.labels) if return_clean else noisy


def prior_after(phi: MonotoneMap, target: JointDistribution) -> float:
    """Class prior of the source with marginal equal to the target's."""
    nv = target.node_values
    eta = target.posterior(target.domain.nodes[nv.support])
    return float(phi(eta) @ nv.marginal[nv.support] / nv.marginal.sum())

