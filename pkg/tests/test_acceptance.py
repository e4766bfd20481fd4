"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines.
Tolerances are fixed here and never loosened to make a run pass.
"""

import math

import numpy as np
import pytest

from impulsectl.bellman import check_martingale_drift, extract_strategy, solve_discounted, solve_undiscounted
from impulsectl.cli import bundled_scenario, refine_lambda
from impulsectl.discounting import ConstantDiscount, HyperbolicDiscount, compute_phi
from impulsectl.instances import random_instances
from impulsectl.montecarlo import simulate_discounted, simulate_undiscounted
from impulsectl.scenario import load_scenario
from impulsectl.stationary import (brute_force_optimum, enumerate_strategies, evaluate_discounted_exact,
                                   evaluate_undiscounted_exact, solve_poisson)

from conftest import ACCEPTANCE_SEED

TOL = 1e-10
K = 4096
ALPHAS = (0.5, 1.0)
CTMC_LADDER = (1.0, 0.5, 0.25, 0.125, 0.0625)


def verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def solved(instances50):
    return [(m, solve_undiscounted(m, TOL)) for m in instances50]


def test_criterion_1_oracle_optimality(capsys, solved):
    worst, mismatches = 0.0, []
    for i, (m, sol) in enumerate(solved):
        assert 4 <= m.n <= 6 and len(m.U) in (2, 3) and m.doeblin <= 0.95
        oracle = brute_force_optimum(m)
        worst = max(worst, abs(sol.lam - oracle.lambda_star))
        if extract_strategy(sol, m) not in oracle.argmins(1e-9):
            mismatches.append(i)
    ok = worst <= 1e-6 and not mismatches
    verdict(capsys, 1, ok, f"max |lambda - lambda*| = {worst:.2e} (<= 1e-6), argmin mismatches {mismatches}")


def test_criterion_2_discrete_equivalence(capsys, solved):
    worst = {a: [0.0, 0.0] for a in ALPHAS}
    for m, sol in solved:
        strategy = extract_strategy(sol, m)
        for a in ALPHAS:
            beta = HyperbolicDiscount(1.0, a)
            dsol = solve_discounted(m, beta, K, TOL)
            exact, _ = evaluate_discounted_exact(strategy, m, compute_phi(beta, m.h, K + 1), 0, K)
            worst[a][0] = max(worst[a][0], abs(dsol.weighted_lambda(K) - sol.lam))
            worst[a][1] = max(worst[a][1], abs(exact - sol.lam))
    ok = all(w <= 1e-3 and e <= 1e-2 for w, e in worst.values())
    detail = "; ".join(f"alpha={a}: weighted gap {w:.2e} (<= 1e-3), exact gap {e:.2e} (<= 1e-2)"
                       for a, (w, e) in worst.items())
    verdict(capsys, 2, ok, detail)


def test_criterion_3_equal_payoff(capsys, solved):
    rng = np.random.default_rng(ACCEPTANCE_SEED + 3)
    worst_u = 0.0
    worst_d = {a: 0.0 for a in ALPHAS}
    phis = {}
    for m, _ in solved[:10]:
        pool = enumerate_strategies(m.n, m.U)
        for j in rng.choice(len(pool), size=20, replace=len(pool) < 20):
            s = pool[j]
            pv = solve_poisson(s, m, TOL)
            worst_u = max(worst_u, abs(evaluate_undiscounted_exact(s, m) - pv.lambda_V))
            for a in ALPHAS:
                phi = phis.setdefault((a, m.h), compute_phi(HyperbolicDiscount(1.0, a), m.h, K + 1))
                val, _ = evaluate_discounted_exact(s, m, phi, 0, K)
                worst_d[a] = max(worst_d[a], abs(val - pv.lambda_V))
    ok = worst_u <= 1e-9 and all(v <= 1e-2 for v in worst_d.values())
    detail = f"undiscounted gap {worst_u:.2e} (<= 1e-9); " + "; ".join(
        f"alpha={a}: discounted gap {v:.2e} (<= 1e-2)" for a, v in worst_d.items())
    verdict(capsys, 3, ok, detail)


def test_criterion_4_martingale_drift(capsys, solved):
    failures = []
    worst_min, worst_cont = math.inf, 0.0
    for i, (m, sol) in enumerate(solved):
        reports = [check_martingale_drift(sol, m)]
        for a in ALPHAS:
            reports.append(check_martingale_drift(solve_discounted(m, HyperbolicDiscount(1.0, a), K, TOL), m))
        for r in reports:
            worst_min = min(worst_min, r.min_drift)
            worst_cont = max(worst_cont, r.max_continuation_drift)
            if not r.passed:
                failures.append(i)
    ok = worst_min >= -1e-8 and worst_cont <= 1e-8 and not failures
    verdict(capsys, 4, ok, f"min drift {worst_min:.2e} (>= -1e-8), continuation |drift| {worst_cont:.2e} "
                           f"(<= 1e-8), failing instances {sorted(set(failures))}")


def test_criterion_5_degenerate_discount(capsys, solved):
    worst_l, worst_w = 0.0, 0.0
    for m, sol in solved:
        d = solve_discounted(m, ConstantDiscount(), K, TOL)
        worst_l = max(worst_l, float(np.max(np.abs(d.lambda_d - sol.lam))))
        # both value functions carry the gauge w(0) = 0
        worst_w = max(worst_w, float(np.max(np.abs(d.w_d - sol.w[None, :]))))
    ok = worst_l <= 1e-8 and worst_w <= 1e-8
    verdict(capsys, 5, ok, f"max |lambda_d(k) - lambda| = {worst_l:.2e}, max |w_d(k) - w| = {worst_w:.2e} (<= 1e-8)")


def _certificate(run, tol):
    return len(run.contraction_violations(1e-12)) == 0 and run.iterations <= run.iteration_bound(tol)


def test_criterion_6_contraction_certificate(capsys, solved):
    runs, bad = 0, []
    for i, (m, sol) in enumerate(solved):
        runs += 1
        if not _certificate(sol, TOL):
            bad.append(f"instance {i}")
    rng = np.random.default_rng(ACCEPTANCE_SEED + 6)
    for i, (m, _) in enumerate(solved[:10]):
        pool = enumerate_strategies(m.n, m.U)
        for j in rng.choice(len(pool), size=5):
            runs += 1
            if not _certificate(solve_poisson(pool[j], m, TOL), TOL):
                bad.append(f"poisson {i}/{j}")
    for name in ("two_state", "two_state_ctmc", "five_state_ctmc"):
        s = load_scenario(bundled_scenario(name))
        for h in s.h_ladder or (s.model.h,):
            runs += 1
            if not _certificate(solve_undiscounted(s.model.with_step(h), TOL), TOL):
                bad.append(f"{name} h={h}")
    verdict(capsys, 6, not bad, f"{runs} solver runs, failing {bad}")


def test_criterion_7_h_refinement(capsys):
    details, ok = [], True
    for name in ("two_state_ctmc", "five_state_ctmc"):
        table = refine_lambda(load_scenario(bundled_scenario(name)), h_ladder=CTMC_LADDER)
        gaps = [r["successive_gap"] for r in table.rows[1:]]
        tracking = max(r["discounted_gap"] for r in table.rows)
        ok &= table.passed
        details.append(f"{name}: gaps {', '.join(f'{g:.2e}' for g in gaps)}; "
                       f"weighted tracking {tracking:.2e} (<= 1e-2)")
    verdict(capsys, 7, ok, " | ".join(details))


def _lands(est, lam):
    allowed = max(3 * est.std_error, 2e-2)
    return abs(est.mean - lam) <= allowed and abs(est.tail_sup - lam) <= allowed


def test_criterion_8_monte_carlo(capsys):
    details, ok = [], True
    for name in ("two_state", "two_state_ctmc", "five_state_ctmc"):
        s = load_scenario(bundled_scenario(name))
        m = s.model
        assert s.sim.n_paths == 10_000 and s.sim.horizon_steps == 10_000
        sol = solve_undiscounted(m, TOL)
        strategy = extract_strategy(sol, m)
        und = simulate_undiscounted(strategy, m, m.h, s.sim)
        dis = simulate_discounted(strategy, m, s.discount, m.h, s.sim)
        flat = simulate_discounted(strategy, m, ConstantDiscount(), m.h, s.sim)
        same = np.array_equal(und.path_values, flat.path_values)
        ok &= _lands(und, sol.lam) and _lands(dis, sol.lam) and same
        details.append(f"{name}: lambda {sol.lam:.4f}, undiscounted {und.mean:.4f}+-{und.std_error:.1e}, "
                       f"discounted {dis.mean:.4f} (tail sup {dis.tail_sup:.4f}), beta=1 identical {same}")
    verdict(capsys, 8, ok, " | ".join(details))


def test_criterion_9_phi_properties(capsys):
    rng = np.random.default_rng(ACCEPTANCE_SEED + 9)
    failures = []
    for _ in range(20):
        beta = HyperbolicDiscount(float(rng.uniform(0.05, 5.0)), float(rng.uniform(0.05, 1.0)))
        for h in (0.1, 0.5, 1.0, 2.0):
            bad = compute_phi(beta, h, 512).invariant_violations()
            if bad:
                failures.append((beta.to_dict(), h, bad[0]))
    verdict(capsys, 9, not failures, f"80 (spec, h) pairs up to K = 512, violations {failures[:3]}")
