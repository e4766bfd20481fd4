"""Experiment orchestration and the ``impulsectl`` command line.

Each experiment returns a dict with a machine-readable ``claim`` naming the
property it checks and a ``passed`` flag; ``run`` collects them into a report
that is written as JSON plus one CSV per table.
"""

import argparse
import csv
import dataclasses
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bellman import (check_martingale_drift, extract_strategy, solve_discounted,
                      solve_undiscounted)
from .errors import ImpulseError, ScenarioError, SizeError
from .montecarlo import SimConfig, simulate_discounted, simulate_undiscounted
from .process import doeblin_coefficient
from .scenario import CONDITIONING_LIMIT, EXPERIMENTS, load_scenario
from .stationary import brute_force_optimum, evaluate_discounted_exact, evaluate_undiscounted_exact

ORACLE_TOL = 1e-6
WEIGHTED_TOL = 1e-3
EQUIVALENCE_TOL = 1e-2
REFINE_TOL = 1e-2
MC_FLOOR = 2e-2
MC_SIGMAS = 3.0

CLAIMS = {
    "solve": "bellman-solution: relative value iteration contracts and the value process is a submartingale",
    "solve-discounted": "discounted-equivalence: weighted lambda_d average matches lambda_h",
    "oracle": "discrete-optimality: solver lambda_h equals the minimum over stationary strategies",
    "equivalence": "equal-payoff: discounted and undiscounted functionals of the optimal strategy equal lambda_h",
    "refine": "h-refinement: lambda_h is Cauchy as h halves and the discounted column tracks it",
    "simulate": "epsilon-optimality: simulated functionals under the grid strategy approach lambda_h",
    "report": "summary: every executed check passed",
}


def bundled_scenario(name):
    """Path of a scenario shipped with the package (``two_state``, ...)."""
    return Path(resources.files("impulsectl") / "scenarios" / f"{name}.json")


def bundled_scenarios():
    return sorted(p.stem for p in Path(resources.files("impulsectl") / "scenarios").glob("*.json"))


@dataclass
class RefinementTable:
    rows: list
    passed: bool
    notes: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {"rows": self.rows, "passed": self.passed, "notes": self.notes, "warnings": self.warnings}


def refine_lambda(scenario, h_ladder=None, tol=None, discount=None, k_horizon=None):
    """Solve both equations along a ladder of grid steps.

    The discounted solve keeps the time horizon fixed across rungs: rung ``h``
    uses ``K = k_horizon * h_ladder[0] / h`` steps. Gaps are judged with a
    slack of ``2 tol``, the accuracy of each lambda.
    """
    model = scenario.model
    if model.generator is None:
        raise ValueError("refinement needs a generator")
    ladder = tuple(h_ladder or scenario.h_ladder or ())
    if len(ladder) < 3 or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("the h ladder must hold at least 3 strictly decreasing steps")
    tol = scenario.solver["tol"] if tol is None else tol
    discount = scenario.discount if discount is None else discount
    k0 = scenario.solver["k_horizon"] if k_horizon is None else k_horizon
    rows, warnings = [], []
    for h in ladder:
        m = model.with_step(h)
        L = doeblin_coefficient(m.kernel)
        if L > CONDITIONING_LIMIT:
            warnings.append(f"h={h}: Doeblin coefficient {L:.9f} exceeds 1 - 1e-6")
        sol = solve_undiscounted(m, tol)
        K = max(1, round(k0 * ladder[0] / h))
        dsol = solve_discounted(m, discount, K, tol)
        wl = dsol.weighted_lambda()
        rows.append({"h": h, "doeblin": L, "lambda_h": sol.lam, "iterations": sol.iterations,
                     "K": K, "weighted_lambda_d": wl, "discounted_gap": abs(wl - sol.lam),
                     "successive_gap": None, "strategy": str(extract_strategy(sol, m, scenario.solver["tie_tol"]))})
    for a, b in zip(rows, rows[1:]):
        b["successive_gap"] = abs(b["lambda_h"] - a["lambda_h"])
    notes = []
    gaps = [r["successive_gap"] for r in rows[1:]]
    for i, (a, b) in enumerate(zip(gaps, gaps[1:])):
        if b > a + 2 * tol:
            notes.append(f"gap grows between h={rows[i + 1]['h']} and h={rows[i + 2]['h']}: {a:.3e} -> {b:.3e}")
    if gaps[-1] >= REFINE_TOL:
        notes.append(f"final gap {gaps[-1]:.3e} is not below {REFINE_TOL}")
    for r in rows:
        if r["discounted_gap"] > REFINE_TOL:
            notes.append(f"h={r['h']}: weighted lambda_d misses lambda_h by {r['discounted_gap']:.3e}")
    return RefinementTable(rows, not notes, notes, warnings)


class _Context:
    """Lazily computed solutions shared between experiments of one run."""

    def __init__(self, scenario):
        self.s = scenario
        self._sol = None
        self._strategy = None

    @property
    def solution(self):
        if self._sol is None:
            self._sol = solve_undiscounted(self.s.model, self.s.solver["tol"])
        return self._sol

    @property
    def strategy(self):
        if self._strategy is None:
            self._strategy = extract_strategy(self.solution, self.s.model, self.s.solver["tie_tol"])
        return self._strategy


def _exp_solve(ctx, tables):
    s, sol, m = ctx.s, ctx.solution, ctx.s.model
    strat = ctx.strategy
    drift = check_martingale_drift(sol, m, tie_tol=s.solver["tie_tol"])
    bound = sol.iteration_bound(s.solver["tol"])
    viol = sol.contraction_violations()
    tables["solve"] = [{"state": x, "label": m.space.labels[x], "w": sol.w[x], "in_D": x in strat.D,
                        "shift_to": strat.shift.get(x, "")} for x in range(m.n)]
    checks = {"residual": sol.residual <= s.solver["tie_tol"], "contraction": not viol,
              "iteration_bound": sol.iterations <= bound, "drift": drift.passed}
    return {"lambda_h": sol.lam, "w": sol.w, "residual": sol.residual, "iterations": sol.iterations,
            "iteration_bound": bound, "doeblin": sol.contraction_factor, "contraction_violations": viol,
            "strategy": strat.to_dict(), "drift": drift.to_dict(), "checks": checks}


def _exp_solve_discounted(ctx, tables):
    s, m = ctx.s, ctx.s.model
    d = solve_discounted(m, s.discount, s.solver["k_horizon"], s.solver["tol"])
    drift = check_martingale_drift(d, m, tie_tol=s.solver["tie_tol"])
    wl = d.weighted_lambda()
    gap = abs(wl - ctx.solution.lam)
    curve = d.weighted_curve()
    tables["solve_discounted"] = [{"k": k, "phi": d.phi[k], "lambda_d": d.lambda_d[k], "weighted": curve[k]}
                                  for k in range(d.K)]
    checks = {"weighted_lambda": gap <= WEIGHTED_TOL, "drift": drift.passed}
    return {"K": d.K, "buffer": d.buffer, "tail_bound": d.tail_bound, "residual": d.residual,
            "weighted_lambda_d": wl, "lambda_h": ctx.solution.lam, "gap": gap, "tolerance": WEIGHTED_TOL,
            "drift": drift.to_dict(), "checks": checks}


def _exp_oracle(ctx, tables):
    m = ctx.s.model
    try:
        res = brute_force_optimum(m)
    except SizeError as exc:
        return {"skipped": str(exc), "checks": {}}
    tables["oracle"] = res.to_rows()
    keys = {a.key() for a in res.argmins()}
    gap = abs(res.lambda_star - ctx.solution.lam)
    checks = {"lambda": gap <= ORACLE_TOL, "strategy_is_argmin": ctx.strategy.key() in keys}
    return {"lambda_star": res.lambda_star, "lambda_h": ctx.solution.lam, "gap": gap,
            "strategy_star": res.strategy_star.to_dict(), "n_strategies": len(res.table), "checks": checks}


def _exp_equivalence(ctx, tables):
    s, m = ctx.s, ctx.s.model
    x0 = s.sim.x0
    und = evaluate_undiscounted_exact(ctx.strategy, m, x0)
    dis, _ = evaluate_discounted_exact(ctx.strategy, m, s.discount, x0, s.solver["k_horizon"])
    lam = ctx.solution.lam
    tables["equivalence"] = [{"lambda_h": lam, "undiscounted_exact": und, "discounted_exact": dis,
                              "x0": x0, "N": s.solver["k_horizon"]}]
    checks = {"undiscounted": abs(und - lam) <= EQUIVALENCE_TOL, "discounted": abs(dis - lam) <= EQUIVALENCE_TOL}
    return {"lambda_h": lam, "undiscounted_exact": und, "discounted_exact": dis, "x0": x0,
            "tolerance": EQUIVALENCE_TOL, "checks": checks}


def _exp_refine(ctx, tables):
    table = refine_lambda(ctx.s)
    tables["refine"] = table.rows
    out = table.to_dict()
    out["checks"] = {"cauchy_and_tracking": table.passed}
    return out


def _within(est, lam):
    allowed = max(MC_SIGMAS * est.std_error, MC_FLOOR)
    return abs(est.tail_sup - lam) <= allowed, allowed


def _exp_simulate(ctx, tables):
    s, m = ctx.s, ctx.s.model
    lam = ctx.solution.lam
    und = simulate_undiscounted(ctx.strategy, m, m.h, s.sim)
    dis = simulate_discounted(ctx.strategy, m, s.discount, m.h, s.sim)
    ok_u, tol_u = _within(und, lam)
    ok_d, tol_d = _within(dis, lam)
    for name, est in (("simulate_undiscounted", und), ("simulate_discounted", dis)):
        tables[name] = [{"step": n, "time": n * m.h, "mean": mu, "std_error": se}
                        for n, mu, se in est.per_checkpoint]
    return {"lambda_h": lam, "config": s.sim.to_dict(), "undiscounted": und.to_dict(),
            "discounted": dis.to_dict(), "allowed": {"undiscounted": tol_u, "discounted": tol_d},
            "checks": {"undiscounted": ok_u, "discounted": ok_d}}


RUNNERS = {"solve": _exp_solve, "solve-discounted": _exp_solve_discounted, "oracle": _exp_oracle,
           "equivalence": _exp_equivalence, "refine": _exp_refine, "simulate": _exp_simulate}


def _versions():
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "impulsectl": __version__}


def run(scenario, experiments, out_dir=None):
    """Execute the selected experiments in dependency order and return the report dict."""
    unknown = set(experiments) - set(EXPERIMENTS)
    if unknown:
        raise ValueError(f"unknown experiments {sorted(unknown)}")
    if "refine" in experiments and not scenario.has_generator:
        raise ValueError("the refine experiment needs a scenario with a generator")
    t0 = time.perf_counter()
    ctx = _Context(scenario)
    tables = {}
    results = {}
    for name in EXPERIMENTS:
        if name not in experiments or name == "report":
            continue
        try:
            res = RUNNERS[name](ctx, tables)
        except (ImpulseError, ValueError, ArithmeticError) as exc:
            res = {"error": f"{type(exc).__name__}: {exc}", "experiment": name, "checks": {"completed": False}}
        res["claim"] = CLAIMS[name]
        res["passed"] = all(res["checks"].values())
        results[name] = res
    validation_ok = all(v.get("passed", True) for v in scenario.validation.values())
    passed = validation_ok and all(r["passed"] for r in results.values())
    if "report" in experiments:
        tables["summary"] = [{"experiment": k, "claim": r["claim"], "passed": r["passed"]}
                             for k, r in results.items()]
        results["report"] = {"claim": CLAIMS["report"], "passed": passed,
                             "summary": {k: r["passed"] for k, r in results.items()}}
    report = {
        "scenario": scenario.name,
        "source": Path(scenario.source).name if scenario.source else None,
        "input_digest": "sha256:" + scenario.digest,
        "versions": _versions(),
        "solver": scenario.solver,
        "validation": scenario.validation,
        "warnings": list(scenario.warnings),
        "experiments": results,
        "passed": passed,
        "timing": {"wall_clock_s": time.perf_counter() - t0},
    }
    report = _jsonable(report)
    if out_dir is not None:
        write_report(report, tables, out_dir)
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_report(report, tables, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for name, rows in tables.items():
        if not rows:
            continue
        with open(out / f"{name}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(_jsonable(rows))


def _override(scenario, args):
    solver = dict(scenario.solver)
    for key, val in (("tol", args.tol), ("tie_tol", args.tie_tol), ("k_horizon", args.k_horizon)):
        if val is not None:
            solver[key] = val
    sim = scenario.sim
    changes = {k: v for k, v in (("seed", args.seed), ("n_paths", args.paths), ("horizon_steps", args.steps),
                                 ("fine_factor", args.fine_factor), ("checkpoint_grid", args.checkpoints))
               if v is not None}
    if "horizon_steps" in changes and "checkpoint_grid" not in changes:
        changes["checkpoint_grid"] = None
    if changes:
        sim = SimConfig(**{**dataclasses.asdict(sim), **changes})
    return dataclasses.replace(scenario, solver=solver, sim=sim)


def _resolve(path):
    p = Path(path)
    if not p.exists() and not p.suffix and path in bundled_scenarios():
        return bundled_scenario(path)
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="impulsectl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate",) + EXPERIMENTS:
        p = sub.add_parser(name, help=CLAIMS.get(name, "load and validate a scenario").split(":")[0])
        p.add_argument("scenario", help="scenario JSON file or the name of a bundled scenario")
        p.add_argument("--out", help="directory for report.json and CSV tables")
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--tie-tol", type=float)
        p.add_argument("--k-horizon", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--fine-factor", type=int)
        p.add_argument("--checkpoints", type=lambda s: [int(x) for x in s.split(",") if x])
        p.add_argument("--quiet", action="store_true", help="print only the pass/fail line")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(_resolve(args.scenario))
        scenario = _override(scenario, args)
    except ScenarioError as exc:
        print(json.dumps({"errors": exc.diagnostics}, indent=2), file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        experiments = ()
    elif args.command == "report":
        experiments = tuple(scenario.experiments) or EXPERIMENTS
        if not scenario.has_generator:
            experiments = tuple(e for e in experiments if e != "refine")
        experiments = tuple(experiments) + ("report",)
    else:
        experiments = (args.command,)
    try:
        report = run(scenario, experiments, args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    if not args.quiet:
        for name, res in report["experiments"].items():
            status = "PASS" if res["passed"] else "FAIL"
            print(f"{status} {name}: {res['claim']}")
            if "error" in res:
                print(f"     {res['error']}")
    print(("PASS" if report["passed"] else "FAIL") + f" {scenario.name} ({report['input_digest'][:19]})")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
