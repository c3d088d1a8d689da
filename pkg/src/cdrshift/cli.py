"""Command-line entry point: ``cdrshift {oracle,fit,evaluate,sweep,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .distributions import check_assumption_A, check_assumption_B
from .estimators import METHODS, EstimatorConfig, estimate_cdr_set
from .exceptions import CdrError
from .experiments import (
    ExperimentPlan,
    resolve_master_seed,
    run_plan,
    summary_table,
)
from .metrics import evaluate_estimate
from .oracle import GnpProblem, optimal_cdr_set, power, solve_gnp_threshold
from .scenarios import load_scenario
from .verify import run_verify_suite


def _level_set_summary(scenario, level_set) -> dict:
    dom = scenario.domain
    if dom.is_grid:
        inside = level_set.membership(dom.points)
        return {"members": dom.points[inside].tolist()}
    if dom.dim != 1:
        return {}
    lo, hi = dom.bounds[0]
    x = np.linspace(lo, hi, 10_001)
    inside = level_set.membership(x[:, None])
    edges = np.flatnonzero(np.diff(inside.astype(int)))
    bounds = [float(lo)] + [float(0.5 * (x[i] + x[i + 1])) for i in edges] + [float(hi)]
    pieces = [[bounds[i], bounds[i + 1]] for i in range(len(bounds) - 1)
              if inside[min(np.searchsorted(x, bounds[i], side="right"), len(x) - 1)]]
    return {"intervals": pieces}


def cmd_oracle(args) -> int:
    sc = load_scenario(args.scenario)
    alpha = args.alpha if args.alpha is not None else sc.alpha
    out = {
        "scenario": sc.name,
        "alpha": alpha,
        "source_prior": sc.source.prior,
        "target_prior": sc.target.prior,
        "phi": sc.phi.name,
    }
    a = check_assumption_A(sc.source, sc.target, alpha)
    out["exact_level_set"] = {"holds": a.holds, "reason": a.reason}
    if a.holds:
        g_pq = optimal_cdr_set(sc.source, sc.target, alpha)
        g_q = optimal_cdr_set(sc.target, sc.target, alpha)
        out["threshold_source_posterior"] = g_pq.threshold
        out["threshold_target_posterior"] = g_q.threshold
        out["phi_of_target_threshold"] = float(sc.phi(g_q.threshold))
        out["optimal_set"] = _level_set_summary(sc, g_pq)
        b = check_assumption_B(sc.source, sc.target, alpha)
        out["growth"] = {"holds": b.holds, "kappa": b.kappa, "b1": b.b1, "b2": b.b2, "reason": b.reason}
    if args.theta1 is not None or args.theta0 is not None:
        theta0 = args.theta0 if args.theta0 is not None else sc.target.prior
        theta1 = args.theta1 if args.theta1 is not None else 1.0
        g = solve_gnp_threshold(sc.target, GnpProblem(theta0, theta1, alpha))
        out["gnp"] = {"theta0": theta0, "theta1": theta1, "threshold": g.threshold,
                      "tie_probability": g.tie_probability, "saturated": g.saturated}
    print(json.dumps(out, indent=2, default=float))
    return 0


def _config(args, scenario) -> EstimatorConfig:
    data = dict(scenario.estimator)
    for key, attr in (("beta", "beta"), ("gamma", "gamma"), ("bandwidth", "bandwidth"),
                      ("lam", "lam"), ("eps_constant", "eps_constant")):
        val = getattr(args, attr, None)
        if val is not None:
            data[key] = val
    return EstimatorConfig.from_dict(data)


def cmd_fit(args) -> int:
    sc = load_scenario(args.scenario)
    alpha = args.alpha if args.alpha is not None else sc.alpha
    cfg = _config(args, sc)
    seed = resolve_master_seed(args.seed)
    lab_seed, unl_seed = np.random.SeedSequence(seed).spawn(2)
    labeled = sc.source.sample_labeled(args.m, lab_seed)
    unlabeled = sc.target.sample_unlabeled(args.n, unl_seed)
    est = estimate_cdr_set(labeled, unlabeled, alpha, args.method, cfg, sc.domain)
    report = evaluate_estimate(sc.source, sc.target, alpha, est)
    out = {
        "scenario": sc.name,
        "method": args.method,
        "alpha": alpha,
        "m": args.m,
        "n": args.n,
        "seed": seed,
        "threshold": est.threshold,
        "estimator": est.config,
        "report": {**report.as_dict(), "power": power(sc.target, est)},
    }
    print(json.dumps(out, indent=2, default=float))
    return 0


def cmd_evaluate(args) -> int:
    sc = load_scenario(args.scenario)
    alpha = args.alpha if args.alpha is not None else sc.alpha
    plan = ExperimentPlan(
        scenario=args.scenario,
        methods=(args.method,),
        ladder=((args.m, args.n),),
        alphas=(alpha,),
        replicates=args.replicates,
        seed=args.seed,
        out=args.out,
        estimator=_config(args, sc).to_dict(),
        workers=args.workers,
    )
    rows = run_plan(plan)
    print(summary_table(rows))
    return 0


def cmd_sweep(args) -> int:
    plan = ExperimentPlan.from_json(args.plan)
    if args.out:
        plan = ExperimentPlan(**{**plan.__dict__, "out": args.out})
    rows = run_plan(plan, workers=args.workers)
    print(summary_table(rows))
    failed = [r for r in rows if r["status"] != "ok"]
    if failed:
        print(f"{len(failed)} replicate(s) failed; see the status column", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    fixtures = []
    for path in args.fixture or ():
        with open(path) as fh:
            fixtures.append(json.load(fh))
    report = run_verify_suite(fixtures, quick=args.quick)
    print(report.format())
    if args.out:
        report.to_csv(args.out)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cdrshift", description=__doc__)
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("oracle", help="print the optimal sets and thresholds of a scenario")
    o.add_argument("--scenario", required=True, help="built-in name (S1..S7) or JSON path")
    o.add_argument("--alpha", type=float)
    o.add_argument("--theta0", type=float, help="also solve the generalized NP problem on the target")
    o.add_argument("--theta1", type=float)
    o.set_defaults(func=cmd_oracle)

    def estimator_args(sp):
        sp.add_argument("--scenario", required=True)
        sp.add_argument("--method", choices=METHODS, default="klr")
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--m", type=int, required=True, help="labeled source sample size")
        sp.add_argument("--n", type=int, required=True, help="unlabeled target sample size")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--bandwidth", type=_number_or("median"))
        sp.add_argument("--lambda", dest="lam", type=_number_or("auto"))
        sp.add_argument("--eps-constant", dest="eps_constant", type=float,
                        help="scale of the deviation bound (default 4)")

    f = sub.add_parser("fit", help="estimate one set and report its risk")
    estimator_args(f)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("evaluate", help="replicate fit and write per-replicate rows")
    estimator_args(e)
    e.add_argument("--replicates", type=int, default=10)
    e.add_argument("--out")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="run an experiment plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--out")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the self-check suite")
    v.add_argument("--out", help="write the check table as CSV")
    v.add_argument("--quick", action="store_true")
    v.add_argument("--fixture", action="append", help="extra scenario JSON to check")
    v.set_defaults(func=cmd_verify)
    return p


def _number_or(word: str):
    def parse(text: str):
        return word if text == word else float(text)
    return parse


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        return args.func(args)
    except CdrError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
