"""Scenario files: a target distribution plus the shift producing the source.

A scenario JSON object looks like::

    {
      "name": "S2",
      "domain": {"kind": "ContinuousBox", "bounds": [[-5, 5]], "resolution": [20000]},
      "prior": 0.5,
      "density0": {"family": "GaussianMixture", "params": [{"weight": 1, "mean": [-1], "cov_diag": [1]}]},
      "density1": {"family": "GaussianMixture", "params": [{"weight": 1, "mean": [1], "cov_diag": [1]}]},
      "shift": {"kind": "CSPD", "phi": "lr_scale(3)", "new_marginal": {...}},
      "alpha": 0.25
    }

Built-in scenarios ``S1`` .. ``S7`` ship with the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .distributions import (
    Density,
    FeatureDomain,
    GaussianMixture,
    JointDistribution,
    TablePmf,
)
from .exceptions import InvalidDistribution, InvalidInput
from .shifts import MonotoneMap, ShiftSpec, identity_map

BUILTIN = ("S1", "S2", "S3", "S4", "S5", "S6", "S7")


@dataclass(frozen=True, eq=False)
class Scenario:
    """Target ``Q``, source ``P`` and the map with ``eta_P = phi(eta_Q)``."""

    name: str
    target: JointDistribution
    source: JointDistribution
    phi: MonotoneMap
    alpha: float
    shift: ShiftSpec | None = None
    description: str = ""
    estimator: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def domain(self) -> FeatureDomain:
        return self.target.domain


def parse_domain(data: dict) -> FeatureDomain:
    kind = data.get("kind")
    if kind == "DiscreteGrid":
        return FeatureDomain.grid(data["points"])
    if kind == "ContinuousBox":
        return FeatureDomain.box(data["bounds"], data.get("resolution", 2000))
    raise InvalidDistribution(f"unknown domain kind {kind!r}")


def parse_density(data: dict, domain: FeatureDomain) -> Density:
    family = data.get("family")
    if family == "TablePmf":
        return TablePmf(domain, data["params"])
    if family == "GaussianMixture":
        if domain.is_grid:
            raise InvalidDistribution("GaussianMixture needs a ContinuousBox domain")
        return GaussianMixture.from_params(data["params"], domain.bounds)
    raise InvalidDistribution(f"unknown density family {family!r}")


def scenario_from_dict(data: dict) -> Scenario:
    domain = parse_domain(data["domain"])
    target = JointDistribution(
        domain,
        float(data["prior"]),
        parse_density(data["density0"], domain),
        parse_density(data["density1"], domain),
        data.get("name", ""),
    )
    shift = None
    source, phi = target, identity_map()
    if data.get("shift"):
        shift = ShiftSpec.from_dict(data["shift"], lambda d: parse_density(d, domain))
        phi = shift.posterior_map(target)
        source = shift.apply(target)
    alpha = float(data.get("alpha", 0.25))
    if not 0.0 < alpha < 1.0:
        raise InvalidInput(f"scenario alpha must lie in (0, 1), got {alpha}")
    return Scenario(
        name=data.get("name", "scenario"),
        target=target,
        source=source,
        phi=phi,
        alpha=alpha,
        shift=shift,
        description=data.get("description", ""),
        estimator=dict(data.get("estimator", {})),
        raw=data,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    q = scenario.target
    out = {
        "name": scenario.name,
        "description": scenario.description,
        "domain": q.domain.to_dict(),
        "prior": q.prior,
        "density0": q.density0.to_dict(),
        "density1": q.density1.to_dict(),
        "alpha": scenario.alpha,
    }
    if scenario.shift is not None:
        out["shift"] = scenario.shift.to_dict()
    if scenario.estimator:
        out["estimator"] = scenario.estimator
    return out


def builtin_dict(name: str) -> dict:
    key = name.upper()
    if key not in BUILTIN:
        raise InvalidInput(f"unknown built-in scenario {name!r}; choose from {BUILTIN}")
    text = resources.files("cdrshift").joinpath("scenarios").joinpath(f"{key}.json").read_text()
    return json.loads(text)


_CACHE: dict[str, Scenario] = {}


def load_scenario(ref: str | Path | dict) -> Scenario:
    """Load a built-in scenario by name, or a scenario JSON file or dict.

    Built-ins are cached since they are immutable.
    """
    if isinstance(ref, dict):
        return scenario_from_dict(ref)
    text = str(ref)
    if text.upper() in BUILTIN:
        key = text.upper()
        if key not in _CACHE:
            _CACHE[key] = scenario_from_dict(builtin_dict(key))
        return _CACHE[key]
    path = Path(text)
    if not path.exists():
        raise InvalidInput(f"no scenario named or stored at {text!r}")
    return scenario_from_dict(json.loads(path.read_text()))
