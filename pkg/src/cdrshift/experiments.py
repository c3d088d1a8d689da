"""Seeded Monte Carlo sweeps over estimators, sample sizes and levels.

Every replicate draws its randomness from
``SeedSequence(master_seed, spawn_key=(cell, replicate))``, so results do not
depend on worker count or execution order.  Rows are written to CSV in plan
order as soon as they are available.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from joblib import Parallel, delayed

from .estimators import METHODS, EstimatorConfig, estimate_cdr_set
from .exceptions import InvalidInput
from .metrics import CSV_COLUMNS, evaluate_estimate
from .scenarios import load_scenario

SEED_ENV = "CDR_SEED"
RECORD_COLUMNS = CSV_COLUMNS + ("cell", "replicate", "threshold", "oracle_threshold", "status", "wall_time")


def resolve_master_seed(seed: int | None) -> int:
    """``CDR_SEED`` from the environment overrides ``seed`` when set."""
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        return int(env)
    return int(seed if seed is not None else 0)


def replicate_seed(master: int, cell: int, replicate: int) -> int:
    """Independent 63-bit seed for one replicate of one cell."""
    ss = np.random.SeedSequence(master, spawn_key=(cell, replicate))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class ExperimentPlan:
    """A grid of cells ``methods x ladder x alphas`` with replicates each."""

    scenario: str
    methods: tuple[str, ...]
    ladder: tuple[tuple[int, int], ...]
    alphas: tuple[float, ...]
    replicates: int
    seed: int = 0
    out: str | None = None
    estimator: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise InvalidInput(f"methods must be a non-empty subset of {METHODS}")
        if not self.ladder or any(len(p) != 2 or min(p) < 1 for p in self.ladder):
            raise InvalidInput("ladder entries must be positive (m, n) pairs")
        if not self.alphas or any(not 0 < a < 1 for a in self.alphas):
            raise InvalidInput("alphas must lie in (0, 1)")
        if self.replicates < 1:
            raise InvalidInput("replicates must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        est = dict(data.get("estimator", {}))
        for key in ("beta", "gamma"):
            if key in data:
                est[key] = data[key]
        return cls(
            scenario=str(data["scenario"]),
            methods=tuple(data.get("methods", ["klr"])),
            ladder=tuple(tuple(int(v) for v in p) for p in data["ladder"]),
            alphas=tuple(float(a) for a in data["alphas"]),
            replicates=int(data.get("replicates", 1)),
            seed=int(data.get("seed", 0)),
            out=data.get("out"),
            estimator=est,
            workers=int(data.get("workers", 1)),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def cells(self) -> list[tuple[str, int, int, float]]:
        return [
            (method, m, n, alpha)
            for method, (m, n), alpha in itertools.product(self.methods, self.ladder, self.alphas)
        ]


def run_replicate(scenario_ref, method: str, m: int, n: int, alpha: float, estimator: dict, seed: int) -> dict:
    """Draw samples, estimate the set, and evaluate it against the truth.

    Any failure is returned as a row with an ``error:`` status.
    """
    start = time.perf_counter()
    cfg = EstimatorConfig.from_dict(estimator)
    row = {k: "" for k in RECORD_COLUMNS}
    row.update(method=method, m=m, n=n, alpha=alpha, beta=cfg.beta, gamma=cfg.gamma, seed=seed)
    try:
        sc = load_scenario(scenario_ref)
        row["scenario"] = sc.name
        lab_seed, unl_seed = np.random.SeedSequence(seed).spawn(2)
        labeled = sc.source.sample_labeled(m, lab_seed)
        unlabeled = sc.target.sample_unlabeled(n, unl_seed)
        est = estimate_cdr_set(labeled, unlabeled, alpha, method, cfg, sc.domain)
        report = evaluate_estimate(sc.source, sc.target, alpha, est)
        row.update(report.to_row(**{k: row[k] for k in CSV_COLUMNS[:8]}))
        row.update(threshold=report.threshold, oracle_threshold=report.oracle_threshold, status="ok")
    except Exception as exc:  # a failing replicate must not abort the plan
        for key in CSV_COLUMNS[8:13]:
            row[key] = math.nan
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    row["wall_time"] = round(time.perf_counter() - start, 4)
    return row


def _jobs(plan: ExperimentPlan, master: int):
    for cell, (method, m, n, alpha) in enumerate(plan.cells()):
        for rep in range(plan.replicates):
            seed = replicate_seed(master, cell, rep)
            yield cell, rep, delayed(run_replicate)(plan.scenario, method, m, n, alpha, plan.estimator, seed)


def iter_plan(plan: ExperimentPlan, workers: int | None = None, master_seed: int | None = None) -> Iterator[dict]:
    """Yield records in plan order."""
    master = plan.seed if master_seed is None else master_seed
    workers = workers or plan.workers
    meta, calls = [], []
    for cell, rep, call in _jobs(plan, master):
        meta.append((cell, rep))
        calls.append(call)
    runner = Parallel(n_jobs=workers, return_as="generator") if workers != 1 else None
    results = runner(calls) if runner else (fn(*a, **k) for fn, a, k in calls)
    for (cell, rep), row in zip(meta, results):
        row["cell"], row["replicate"] = cell, rep
        yield row


def write_records(rows: Iterable[dict], path: str | Path) -> list[dict]:
    """Stream rows to ``path`` (flushed per row) and return them."""
    out = []
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(_fmt(row))
            fh.flush()
            out.append(row)
    return out


def _fmt(row: dict) -> dict:
    return {k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()}


def run_plan(plan: ExperimentPlan, workers: int | None = None) -> list[dict]:
    """Run every replicate of every cell; the seed honours ``CDR_SEED``."""
    master = resolve_master_seed(plan.seed)
    rows = iter_plan(plan, workers, master)
    if plan.out:
        return write_records(rows, plan.out)
    return list(rows)


@dataclass(frozen=True)
class CellSummary:
    method: str
    m: int
    n: int
    alpha: float
    replicates: int
    failures: int
    median_risk: float
    mean_risk: float
    mean_violation: float


def summarize(rows: Iterable[dict]) -> list[CellSummary]:
    """Median and mean risk per cell, in first-seen order."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["method"], row["m"], row["n"], row["alpha"]), []).append(row)
    out = []
    for (method, m, n, alpha), rs in groups.items():
        ok = [r for r in rs if r["status"] == "ok"]
        risks = np.array([float(r["sym_diff_risk"]) for r in ok])
        viol = np.array([float(r["constraint_violation"]) for r in ok])
        out.append(CellSummary(
            method, int(m), int(n), float(alpha), len(rs), len(rs) - len(ok),
            float(np.median(risks)) if ok else math.nan,
            float(risks.mean()) if ok else math.nan,
            float(viol.mean()) if ok else math.nan,
        ))
    return out


def summary_table(rows: Iterable[dict]) -> str:
    lines = [f"{'method':<10}{'m':>7}{'n':>7}{'alpha':>7}{'reps':>6}{'fail':>6}{'median':>10}{'mean':>10}{'viol':>10}"]
    for c in summarize(rows):
        lines.append(
            f"{c.method:<10}{c.m:>7}{c.n:>7}{c.alpha:>7.3g}{c.replicates:>6}{c.failures:>6}"
            f"{c.median_risk:>10.4f}{c.mean_risk:>10.4f}{c.mean_violation:>10.4f}"
        )
    return "\n".join(lines)


def plan_dict(plan: ExperimentPlan) -> dict:
    return asdict(plan)
