"""Feature domains, class-conditional densities and joint distributions.

A :class:`JointDistribution` is a class prior plus two class-conditional
densities on a shared :class:`FeatureDomain`.  Posteriors and marginals are
exact for table densities and exact up to quadrature for densities on a box.

The law of a score under a measure is represented by :class:`ScoreLaw`.  On a
grid it is a finite set of atoms.  On a box every quadrature cell contributes
its mass spread uniformly over the range the score takes on that cell, which
gives a continuous CDF whose thresholds can be found by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .exceptions import (
    DomainError,
    InvalidInput,
    InvalidDistribution,
    UnsupportedDomain,
    ZeroMarginalDensity,
)

#: Score values closer than this are treated as a single atom.
TIE_TOL = 1e-12

Score = Callable[[np.ndarray], np.ndarray]


def as_features(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to a float array of shape ``(k, dim)``.

    A 1-d input is read as ``k`` scalar features when ``dim == 1`` and as a
    single feature vector otherwise.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DomainError(f"expected features of dimension {dim}, got shape {np.shape(x)}")
    return arr


class DomainKind(str, Enum):
    GRID = "DiscreteGrid"
    BOX = "ContinuousBox"


@dataclass(frozen=True, eq=False)
class FeatureDomain:
    """A finite grid of points or an axis-aligned box with a midpoint rule.

    Use :meth:`grid` or :meth:`box` rather than the raw constructor.
    """

    kind: DomainKind
    points: np.ndarray | None = None
    bounds: np.ndarray | None = None
    resolution: tuple[int, ...] | None = None

    @classmethod
    def grid(cls, points) -> "FeatureDomain":
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise InvalidDistribution("grid points must be a non-empty (k, d) array")
        if not np.all(np.isfinite(arr)):
            raise InvalidDistribution("grid points must be finite")
        if len(np.unique(arr, axis=0)) != len(arr):
            raise InvalidDistribution("grid points must be distinct")
        arr.setflags(write=False)
        return cls(DomainKind.GRID, points=arr)

    @classmethod
    def box(cls, bounds, resolution: int | Sequence[int] = 2000) -> "FeatureDomain":
        arr = np.asarray(bounds, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(1, 2)
        if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(arr[:, 0] < arr[:, 1]):
            raise InvalidDistribution("box bounds must be (d, 2) with lower < upper")
        if not np.all(np.isfinite(arr)):
            raise InvalidDistribution("box bounds must be finite")
        res = np.broadcast_to(np.asarray(resolution, dtype=int), (arr.shape[0],))
        if np.any(res < 1):
            raise InvalidDistribution("resolution must be positive")
        arr.setflags(write=False)
        return cls(DomainKind.BOX, bounds=arr, resolution=tuple(int(r) for r in res))

    @property
    def dim(self) -> int:
        return self.points.shape[1] if self.is_grid else self.bounds.shape[0]

    @property
    def is_grid(self) -> bool:
        return self.kind is DomainKind.GRID

    @property
    def size(self) -> int:
        """Number of quadrature nodes (grid points or box cells)."""
        return len(self.nodes)

    @cached_property
    def cell_widths(self) -> np.ndarray:
        if self.is_grid:
            raise UnsupportedDomain("a grid has no cells")
        return (self.bounds[:, 1] - self.bounds[:, 0]) / np.asarray(self.resolution)

    @cached_property
    def nodes(self) -> np.ndarray:
        if self.is_grid:
            return self.points
        axes = [
            lo + (np.arange(r) + 0.5) * h
            for (lo, _), r, h in zip(self.bounds, self.resolution, self.cell_widths)
        ]
        return _lattice(axes)

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weight of each node (1 on a grid, the cell volume on a box)."""
        if self.is_grid:
            return np.ones(len(self.points))
        return np.full(self.size, float(np.prod(self.cell_widths)))

    @cached_property
    def _vertices(self) -> np.ndarray:
        axes = [
            np.linspace(lo, hi, r + 1)
            for (lo, hi), r in zip(self.bounds, self.resolution)
        ]
        return _lattice(axes)

    @cached_property
    def _index(self) -> dict:
        return {tuple(row): i for i, row in enumerate(self.points.tolist())}

    def index_of(self, x) -> np.ndarray:
        """Grid index of each feature vector; raises if one is not a grid point."""
        if not self.is_grid:
            raise UnsupportedDomain("index_of is only defined on a grid")
        arr = as_features(x, self.dim)
        lookup = self._index
        try:
            return np.fromiter((lookup[tuple(r)] for r in arr.tolist()), dtype=np.intp, count=len(arr))
        except KeyError as exc:
            raise DomainError(f"feature {exc.args[0]} is not a grid point") from None

    def contains(self, x) -> np.ndarray:
        arr = as_features(x, self.dim)
        if self.is_grid:
            lookup = self._index
            return np.array([tuple(r) in lookup for r in arr.tolist()], dtype=bool)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return np.all((arr >= lo) & (arr <= hi), axis=1)

    def score_ranges(self, score: Score, mask: np.ndarray | None = None):
        """Range ``(lo, hi)`` of ``score`` over each node.

        On a grid both are the score at the point.  On a box they are the
        minimum and maximum of the score over the corners of each cell.
        ``mask`` restricts grid evaluation to selected nodes (other entries
        are NaN), which avoids evaluating a posterior off its support.
        """
        if self.is_grid:
            vals = np.full(self.size, np.nan)
            sel = np.ones(self.size, bool) if mask is None else mask
            if np.any(sel):
                vals[sel] = np.asarray(score(self.points[sel]), dtype=float)
            return vals, vals
        shape = tuple(r + 1 for r in self.resolution)
        vert = np.asarray(score(self._vertices), dtype=float).reshape(shape)
        lo = hi = None
        for corner in np.ndindex(*(2,) * self.dim):
            view = vert[tuple(slice(c, c + r) for c, r in zip(corner, self.resolution))]
            lo = view if lo is None else np.minimum(lo, view)
            hi = view if hi is None else np.maximum(hi, view)
        return lo.reshape(-1), hi.reshape(-1)

    def to_dict(self) -> dict:
        if self.is_grid:
            return {"kind": self.kind.value, "points": self.points.tolist()}
        return {
            "kind": self.kind.value,
            "bounds": self.bounds.tolist(),
            "resolution": list(self.resolution),
        }


def _lattice(axes: list[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


# ---------------------------------------------------------------------------
# densities


class Density:
    """Interface for a density on a feature domain."""

    family: str = "Density"
    dim: int

    def pdf(self, x) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        from .exceptions import UnsupportedSampler

        raise UnsupportedSampler(f"{self.family} cannot be sampled")

    def to_dict(self) -> dict:
        raise NotImplementedError(f"{self.family} has no serial form")


@dataclass(frozen=True, eq=False)
class TablePmf(Density):
    """Probability mass function stored as a table over grid points."""

    domain: FeatureDomain
    probs: np.ndarray

    family = "TablePmf"

    def __post_init__(self):
        if not self.domain.is_grid:
            raise UnsupportedDomain("TablePmf needs a grid domain")
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        if p.shape != (self.domain.size,):
            raise InvalidDistribution(f"expected {self.domain.size} probabilities, got {p.size}")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise InvalidDistribution("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise InvalidDistribution(f"probabilities sum to {p.sum():.12g}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def pdf(self, x) -> np.ndarray:
        return self.probs[self.domain.index_of(x)]

    def sample_index(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.choice(self.domain.size, size=count, p=self.probs / self.probs.sum())

    def sample(self, rng, count):
        return self.domain.points[self.sample_index(rng, count)]

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.probs.tolist()}


@dataclass(frozen=True, eq=False)
class GaussianMixture(Density):
    """Diagonal Gaussian mixture truncated to a box and renormalised."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    bounds: np.ndarray

    family = "GaussianMixture"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        var = np.atleast_2d(np.asarray(self.variances, dtype=float))
        b = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if mu.shape != var.shape or mu.shape[0] != w.size or mu.shape[1] != b.shape[0]:
            raise InvalidDistribution("inconsistent mixture parameter shapes")
        if np.any(w < 0) or w.sum() <= 0 or np.any(var <= 0):
            raise InvalidDistribution("weights must be non-negative and variances positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidDistribution(f"mixture weights sum to {w.sum():.12g}, not 1")
        for name, val in (("weights", w), ("means", mu), ("variances", var), ("bounds", b)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def from_params(cls, params: list[dict], bounds) -> "GaussianMixture":
        return cls(
            weights=[c.get("weight", 1.0) for c in params],
            means=[c["mean"] for c in params],
            variances=[c["cov_diag"] for c in params],
            bounds=bounds,
        )

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @cached_property
    def normalizer(self) -> float:
        """Mass of the untruncated mixture inside the box."""
        sd = np.sqrt(self.variances)
        lo = (self.bounds[:, 0] - self.means) / sd
        hi = (self.bounds[:, 1] - self.means) / sd
        return float(self.weights @ np.prod(ndtr(hi) - ndtr(lo), axis=1))

    def pdf(self, x) -> np.ndarray:
        arr = as_features(x, self.dim)
        z2 = (arr[:, None, :] - self.means[None]) ** 2 / self.variances[None]
        log_norm = -0.5 * np.sum(np.log(2 * np.pi * self.variances), axis=1)
        dens = np.exp(log_norm[None] - 0.5 * z2.sum(axis=2)) @ self.weights
        inside = np.all((arr >= self.bounds[:, 0]) & (arr <= self.bounds[:, 1]), axis=1)
        return np.where(inside, dens / self.normalizer, 0.0)

    def sample(self, rng, count):
        out = np.empty((count, self.dim))
        filled = 0
        sd = np.sqrt(self.variances)
        while filled < count:
            need = count - filled
            batch = int(need / max(self.normalizer, 1e-3) * 1.2) + 16
            comp = rng.choice(self.weights.size, size=batch, p=self.weights)
            draw = self.means[comp] + sd[comp] * rng.standard_normal((batch, self.dim))
            ok = np.all((draw >= self.bounds[:, 0]) & (draw <= self.bounds[:, 1]), axis=1)
            draw = draw[ok][:need]
            out[filled:filled + len(draw)] = draw
            filled += len(draw)
        return out

    def to_dict(self) -> dict:
        params = [
            {"weight": float(w), "mean": m.tolist(), "cov_diag": v.tolist()}
            for w, m, v in zip(self.weights, self.means, self.variances)
        ]
        return {"family": self.family, "params": params}


@dataclass(frozen=True, eq=False)
class MixtureDensity(Density):
    """Finite mixture of other densities, e.g. a marginal built from classes."""

    components: tuple[Density, ...]
    mix: tuple[float, ...]

    family = "Mixture"

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def pdf(self, x) -> np.ndarray:
        return sum(w * c.pdf(x) for w, c in zip(self.mix, self.components) if w > 0)

    def sample(self, rng, count):
        which = rng.choice(len(self.components), size=count, p=np.asarray(self.mix) / sum(self.mix))
        out = np.empty((count, self.dim))
        for i, comp in enumerate(self.components):
            sel = which == i
            if sel.any():
                out[sel] = comp.sample(rng, int(sel.sum()))
        return out


@dataclass(frozen=True, eq=False)
class ReweightedDensity(Density):
    """``base(x) * weight(x) / normalizer`` for a weight taking values in [0, 1].

    Sampled by rejection from ``base`` with acceptance probability ``weight``.
    """

    base: Density
    weight: Score
    normalizer: float

    family = "Reweighted"

    @property
    def dim(self) -> int:
        return self.base.dim

    def pdf(self, x) -> np.ndarray:
        return self.base.pdf(x) * self.weight(x) / self.normalizer

    def sample(self, rng, count):
        out = np.empty((count, self.dim))
        filled = 0
        while filled < count:
            need = count - filled
            batch = int(need / max(self.normalizer, 1e-3) * 1.2) + 16
            draw = self.base.sample(rng, batch)
            keep = rng.random(batch) < self.weight(draw)
            draw = draw[keep][:need]
            out[filled:filled + len(draw)] = draw
            filled += len(draw)
        return out


# ---------------------------------------------------------------------------
# samples and joint distributions


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """Feature matrix of shape ``(m, d)`` with 0/1 labels."""

    features: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class UnlabeledSample:
    """Feature matrix of shape ``(n, d)``."""

    features: np.ndarray

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class NodeValues:
    """Class-conditional and marginal masses at the quadrature nodes."""

    q0: np.ndarray
    q1: np.ndarray
    marginal: np.ndarray
    support: np.ndarray


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Class prior ``prior = P(Y=1)`` with densities of ``X | Y=0`` and ``X | Y=1``."""

    domain: FeatureDomain
    prior: float
    density0: Density
    density1: Density
    name: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.prior) and 0.0 < self.prior < 1.0):
            raise InvalidDistribution(f"prior must lie in (0, 1), got {self.prior}")
        object.__setattr__(self, "prior", float(self.prior))
        tol = 1e-9 if self.domain.is_grid else 1e-3
        for label, dens in ((0, self.density0), (1, self.density1)):
            if dens.dim != self.domain.dim:
                raise InvalidDistribution(f"class-{label} density has the wrong dimension")
            total = float(np.sum(dens.pdf(self.domain.nodes) * self.domain.weights))
            if abs(total - 1.0) > tol:
                raise InvalidDistribution(f"class-{label} density integrates to {total:.6g}")

    def class_density(self, label: int, x) -> np.ndarray:
        return (self.density1 if label else self.density0).pdf(x)

    def marginal(self, x) -> np.ndarray:
        return self.prior * self.density1.pdf(x) + (1 - self.prior) * self.density0.pdf(x)

    def posterior(self, x) -> np.ndarray:
        """``P(Y=1 | X=x)``; raises where the marginal density is zero."""
        num = self.prior * self.density1.pdf(x)
        den = num + (1 - self.prior) * self.density0.pdf(x)
        if np.any(den <= 0):
            raise ZeroMarginalDensity("posterior undefined where the marginal density is zero")
        return num / den

    def marginal_density(self) -> Density:
        if self.domain.is_grid:
            q0, q1 = self.node_values.q0, self.node_values.q1
            probs = self.prior * q1 + (1 - self.prior) * q0
            return TablePmf(self.domain, probs / probs.sum())
        return MixtureDensity((self.density0, self.density1), (1 - self.prior, self.prior))

    @cached_property
    def node_values(self) -> NodeValues:
        """Densities times quadrature weights at every node."""
        nodes, w = self.domain.nodes, self.domain.weights
        q0 = self.density0.pdf(nodes) * w
        q1 = self.density1.pdf(nodes) * w
        marg = self.prior * q1 + (1 - self.prior) * q0
        return NodeValues(q0=q0, q1=q1, marginal=marg, support=marg > 0)

    @cached_property
    def class_prior_check(self) -> float:
        """Integral of the posterior against the marginal; equals ``prior``."""
        nv = self.node_values
        eta = self.posterior(self.domain.nodes[nv.support])
        return float(eta @ nv.marginal[nv.support])

    def sample_labeled(self, count: int, seed=None) -> LabeledSample:
        count = _check_count(count)
        rng = np.random.default_rng(seed)
        labels = (rng.random(count) < self.prior).astype(np.int64)
        n1 = int(labels.sum())
        feats = np.empty((count, self.domain.dim))
        if n1:
            feats[labels == 1] = self.density1.sample(rng, n1)
        if count - n1:
            feats[labels == 0] = self.density0.sample(rng, count - n1)
        return LabeledSample(feats, labels)

    def sample_unlabeled(self, count: int, seed=None) -> UnlabeledSample:
        return UnlabeledSample(self.sample_labeled(count, seed).features)


def _check_count(count) -> int:
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise InvalidInput(f"sample size must be a positive integer, got {count!r}")
    return int(count)


# ---------------------------------------------------------------------------
# score laws


@dataclass(frozen=True, eq=False)
class ScoreLaw:
    """Distribution of a score under a finite measure.

    ``atom_values`` (sorted, ties grouped) carry ``atom_mass``.  Each cell
    spreads ``cell_mass`` uniformly over ``[cell_lo, cell_hi]``.
    """

    atom_values: np.ndarray
    atom_mass: np.ndarray
    cell_lo: np.ndarray
    cell_hi: np.ndarray
    cell_mass: np.ndarray

    @property
    def total(self) -> float:
        return float(self.atom_mass.sum() + self.cell_mass.sum())

    @property
    def is_discrete(self) -> bool:
        return self.cell_mass.size == 0

    def value_range(self) -> tuple[float, float]:
        vals = np.concatenate([self.atom_values, self.cell_lo, self.cell_hi])
        return float(vals.min()), float(vals.max())

    @cached_property
    def _cells_sorted(self):
        order = np.argsort(self.cell_lo, kind="stable")
        lo, hi, mass = self.cell_lo[order], self.cell_hi[order], self.cell_mass[order]
        cum = np.concatenate([[0.0], np.cumsum(mass)])
        return lo, hi, mass, hi - lo, cum, float((hi - lo).max())

    def _cells_above(self, t: np.ndarray) -> np.ndarray:
        # cells starting above t count fully; only cells starting within one
        # maximal width below t can straddle it
        if self.cell_mass.size == 0:
            return np.zeros(t.shape)
        lo, hi, mass, width, cum, max_w = self._cells_sorted
        j_hi = np.searchsorted(lo, t, side="right")
        j_lo = np.searchsorted(lo, t - max_w, side="left")
        out = cum[-1] - cum[j_hi]
        for k in range(t.size):
            a, b = j_lo[k], j_hi[k]
            if b > a:
                frac = np.clip((hi[a:b] - t[k]) / width[a:b], 0.0, 1.0)
                out[k] += frac @ mass[a:b]
        return out

    def upper(self, t):
        """Mass of ``{score >= t}``."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.atom_values, tt - TIE_TOL, side="left")
        csum = np.concatenate([[0.0], np.cumsum(self.atom_mass[::-1])])[::-1]
        res = csum[idx] + self._cells_above(tt)
        return res if np.ndim(t) else float(res[0])

    def upper_strict(self, t):
        """Mass of ``{score > t}``."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.atom_values, tt + TIE_TOL, side="right")
        csum = np.concatenate([[0.0], np.cumsum(self.atom_mass[::-1])])[::-1]
        res = csum[idx] + self._cells_above(tt)
        return res if np.ndim(t) else float(res[0])

    def cdf(self, t):
        """Mass of ``{score <= t}``; right-continuous."""
        res = self.total - self.upper_strict(t)
        return np.maximum(res, 0.0) if np.ndim(t) else max(res, 0.0)

    def atom_at(self, t: float) -> float:
        sel = np.abs(self.atom_values - t) <= TIE_TOL
        return float(self.atom_mass[sel].sum())

    def np_threshold(self, alpha: float) -> tuple[float, float, bool]:
        """Smallest ``t`` with ``mass{score > t} <= alpha`` and the tie fraction.

        Returns ``(t, q, saturated)`` where ``mass{> t} + q * mass{= t}``
        equals ``alpha``.  ``saturated`` is set when the whole measure fits in
        the budget, in which case ``t`` is the lowest score and ``q = 1``.
        """
        lo_v, _ = self.value_range()
        if self.total <= alpha + TIE_TOL:
            return lo_v, 1.0, True
        if self.is_discrete:
            above = 0.0
            for v, m in zip(self.atom_values[::-1], self.atom_mass[::-1]):
                if above + m > alpha + TIE_TOL:
                    q = min(max((alpha - above) / m, 0.0), 1.0)
                    return float(v), q, False
                above += m
            return lo_v, 1.0, True
        lo, hi = self._bisect(self.upper_strict, alpha, strict_side=True)
        t = hi
        near = self.atom_values[(self.atom_values >= lo - TIE_TOL) & (self.atom_values <= hi + TIE_TOL)]
        if near.size:
            t = float(near[-1])
            mass = self.atom_at(t)
            q = min(max((alpha - self.upper_strict(t)) / mass, 0.0), 1.0)
            return t, q, False
        return t, 0.0, False

    def level_threshold(self, mass: float, tol: float = 1e-12) -> tuple[float | None, str]:
        """Threshold ``t`` with ``mass{score >= t} == mass``, if one exists.

        Returns ``(t, "")`` on success and ``(None, reason)`` otherwise.
        """
        if self.is_discrete:
            vals = self.atom_values[::-1]
            suffix = np.cumsum(self.atom_mass[::-1])
            hit = np.flatnonzero(np.abs(suffix - mass) <= tol)
            if hit.size:
                return float(vals[hit[0]]), ""
            j = int(np.searchsorted(suffix, mass))
            j = min(j, len(vals) - 1)
            return None, (
                f"no upper level set has mass {mass:g}: the atom at score "
                f"{vals[j]:.6g} straddles it (suffix masses {suffix[max(j - 1, 0)]:.6g}"
                f" -> {suffix[j]:.6g})"
            )
        lo, _ = self._bisect(self.upper, mass, strict_side=False)
        got = self.upper(lo)
        if abs(got - mass) <= max(tol, 1e-6):
            return lo, ""
        return None, (
            f"no upper level set has mass {mass:g}: an atom near score {lo:.6g} "
            f"jumps over it (mass {got:.6g} at the threshold)"
        )

    def _bisect(self, fn, target: float, strict_side: bool) -> tuple[float, float]:
        # fn is non-increasing; find lo with fn(lo) > target (or >=) and hi
        # with fn(hi) <= target (or <) at distance <= 1e-13.
        vmin, vmax = self.value_range()
        lo, hi = vmin - 1.0, vmax + 1.0
        for _ in range(200):
            if hi - lo <= 1e-13 * max(1.0, abs(hi)):
                break
            mid = 0.5 * (lo + hi)
            val = fn(mid)
            ok_hi = val <= target if strict_side else val < target
            if ok_hi:
                hi = mid
            else:
                lo = mid
        return lo, hi


def score_law(domain: FeatureDomain, score: Score, node_mass: np.ndarray) -> ScoreLaw:
    """Law of ``score`` under the measure with ``node_mass`` at each node.

    Nodes without mass are dropped; on a grid the score is not evaluated there.
    """
    node_mass = np.asarray(node_mass, dtype=float)
    keep = node_mass > 0
    lo, hi = domain.score_ranges(score, mask=keep if domain.is_grid else None)
    lo, hi, mass = lo[keep], hi[keep], node_mass[keep]
    flat = (hi - lo) <= TIE_TOL
    atom_vals, atom_mass = _group_atoms(lo[flat], mass[flat])
    return ScoreLaw(atom_vals, atom_mass, lo[~flat], hi[~flat], mass[~flat])


def _group_atoms(values: np.ndarray, mass: np.ndarray):
    if values.size == 0:
        return np.empty(0), np.empty(0)
    order = np.argsort(values, kind="stable")
    v, m = values[order], mass[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(v) > TIE_TOL) + 1])
    return v[starts], np.add.reduceat(m, starts)


def cdf_of_score(dist: JointDistribution, score: Score, t):
    """``F(t) = dist.marginal({score <= t})``."""
    return score_law(dist.domain, score, dist.node_values.marginal).cdf(t)


def marginal_score_law(target: JointDistribution, score: Score) -> ScoreLaw:
    return score_law(target.domain, score, target.node_values.marginal)


# ---------------------------------------------------------------------------
# regularity checks


@dataclass(frozen=True)
class LevelSetCheck:
    """Outcome of the exact-mass level-set check."""

    holds: bool
    threshold: float | None
    reason: str = ""


@dataclass(frozen=True)
class GrowthReport:
    """Numerical growth exponents of the score CDF around the threshold."""

    holds: bool
    kappa: float
    kappa_left: float
    kappa_right: float
    b1: float
    b2: float
    threshold: float | None
    reason: str = ""


def _check_domains(source: JointDistribution, target: JointDistribution):
    if source.domain is not target.domain:
        same = source.domain.to_dict() == target.domain.to_dict()
        if not same:
            raise InvalidDistribution("source and target must share a feature domain")


def check_assumption_A(source: JointDistribution, target: JointDistribution, alpha: float) -> LevelSetCheck:
    """Does some set ``{eta_source >= t}`` carry target-marginal mass exactly ``alpha``?"""
    _check_domains(source, target)
    law = marginal_score_law(target, source.posterior)
    t, reason = law.level_threshold(alpha)
    if t is None:
        return LevelSetCheck(False, None, reason)
    return LevelSetCheck(True, t)


def check_assumption_B(
    source: JointDistribution,
    target: JointDistribution,
    alpha: float,
    deltas: Sequence[float] | None = None,
) -> GrowthReport:
    """Fit the local growth exponent of ``F(t) = Q_X(eta_P <= t)`` on each side of the threshold.

    Fails when the level-set check fails, when ``F`` is flat on one side
    (the threshold is not unique) or when it jumps at the threshold.
    """
    a = check_assumption_A(source, target, alpha)
    if not a.holds:
        return GrowthReport(False, np.nan, np.nan, np.nan, np.nan, np.nan, None, a.reason)
    t = a.threshold
    if deltas is None:
        # stay inside [0, 1] and well above the quadrature cell scale
        hi = min(0.2, 0.5 * min(t, 1.0 - t))
        deltas = np.geomspace(hi / 10, hi, 8)
    deltas = np.asarray(deltas, dtype=float)
    law = marginal_score_law(target, source.posterior)
    f_t = law.cdf(t)
    right = law.cdf(t + deltas) - f_t
    left = f_t - law.cdf(t - deltas)
    # on a grid the CDF has an atom at t: F(t) - F(t-) > 0 for every delta
    left = left - (law.atom_at(t) if law.is_discrete else 0.0)
    for side, diff in (("right", right), ("left", left)):
        if np.any(diff <= 1e-15):
            return GrowthReport(False, np.nan, np.nan, np.nan, 0.0, np.nan, t,
                                f"the score CDF is flat on the {side} of t={t:.6g}")
    k_right = float(np.polyfit(np.log(deltas), np.log(right), 1)[0])
    k_left = float(np.polyfit(np.log(deltas), np.log(left), 1)[0])
    kappa = max(k_left, k_right)
    ratios = np.concatenate([left, right]) / np.concatenate([deltas, deltas]) ** kappa
    if min(k_left, k_right) < 0.05:
        return GrowthReport(False, kappa, k_left, k_right, float(ratios.min()), float(ratios.max()), t,
                            "the score CDF jumps at the threshold")
    return GrowthReport(True, kappa, k_left, k_right, float(ratios.min()), float(ratios.max()), t)
