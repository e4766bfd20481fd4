"""Exact analysis of stationary impulse strategies.

A stationary strategy ``(D, psi)`` turns the grid chain into a Markov chain on
``D``: from ``y`` draw ``z ~ P(y, .)``; if ``z`` left ``D`` pay ``c(z, psi(z))/h``
and land at ``psi(z)``. Everything here is computed from that embedded chain
by linear algebra, which makes these routines an oracle for the Bellman solver.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .bellman import contraction_violations, iteration_bound
from .discounting import DiscountSpec, PhiSequence, compute_phi
from .errors import ConvergenceError, ErgodicityError, SizeError
from .model import StationaryStrategy
from .process import doeblin_coefficient, span, stationary_distribution

MAX_ITER = 1_000_000


@dataclass(frozen=True)
class ControlledChain:
    """Post-impulse chain of a stationary strategy.

    Rows of ``kernel_eff`` for states outside ``D`` copy the row of their shift
    target: such states are only ever visited at time zero, where the impulse
    happens before the first step. ``entry_state``/``entry_cost`` describe that
    time-zero impulse.
    """

    strategy: StationaryStrategy
    kernel_eff: np.ndarray
    impulse_cost_rate: np.ndarray
    entry_state: np.ndarray
    entry_cost: np.ndarray
    inside: np.ndarray = field(repr=False)


def build_controlled_chain(strategy, model):
    n = model.n
    strategy.check(n, model.space.impulse_targets)
    land, out = strategy.entry(n)
    col = {u: j for j, u in enumerate(model.space.impulse_targets)}
    shift_cost = np.zeros(n)
    for x, t in strategy.psi:
        shift_cost[x] = model.costs.c[x, col[t]] / model.h
    P = model.P
    K = np.zeros((n, n))
    # column z of P is routed to land[z]
    np.add.at(K.T, land, P.T)
    rate = P @ shift_cost
    K[out] = K[land[out]]
    rate[out] = rate[land[out]]
    return ControlledChain(strategy, K, rate, land, shift_cost, ~out)


@dataclass(frozen=True)
class PoissonSolution:
    w_V: np.ndarray
    lambda_V: float
    residual: float
    iterations: int
    contraction_factor: float
    spans: np.ndarray = field(repr=False)

    def iteration_bound(self, tol):
        return iteration_bound(self.spans, self.contraction_factor, tol)

    def contraction_violations(self, rel=1e-12):
        return contraction_violations(self.spans, self.contraction_factor, rel)


def solve_poisson(strategy, model, tol=1e-10, max_iter=MAX_ITER, chain=None):
    """Relative value iteration for the fixed-strategy equation on ``D``.

    ``v <- g + rate + K_eff v`` restricted to ``D`` with ``v(x_ref) = 0`` for
    the lowest index in ``D``, stopping once the span of the update is below
    ``tol``; the solution is then extended to ``D^c`` by
    ``w(x) = c(x, psi(x))/h + w(psi(x))``.
    """
    ch = chain or build_controlled_chain(strategy, model)
    idx = np.nonzero(ch.inside)[0]
    Kd = ch.kernel_eff[np.ix_(idx, idx)]
    L = doeblin_coefficient(Kd)
    if L >= 1.0:
        raise ErgodicityError(f"controlled chain has Doeblin coefficient {L}", L)
    f = (model.costs.g + ch.impulse_cost_rate)[idx]
    Fv = f.copy()
    v = Fv - Fv[0]
    d = v.copy()
    stop = tol
    spans = []
    it = 1
    while True:
        s = span(d)
        spans.append(s)
        if s <= stop:
            break
        if it >= max_iter:
            raise ConvergenceError("Poisson iteration hit its cap", s, it)
        change = Kd @ d
        d = change - change[0]
        v = v + d
        it += 1
    e = f + Kd @ v - v
    lam = 0.5 * (e.max() + e.min())
    w = np.zeros(model.n)
    w[idx] = v
    out = ~ch.inside
    w[out] = ch.entry_cost[out] + w[ch.entry_state[out]]
    resid = float(np.max(np.abs(e - lam)))
    return PoissonSolution(w, float(lam), resid, it, L, np.asarray(spans))


def poisson_residuals(sol, strategy, model):
    """Max violation of both fixed-strategy identities (on D and on D^c)."""
    ch = build_controlled_chain(strategy, model)
    w = sol.w_V
    P = model.P
    inner = model.costs.g - sol.lambda_V + P @ np.where(ch.inside, w, ch.entry_cost + w[ch.entry_state]) - w
    outer = ch.entry_cost + w[ch.entry_state] - w
    return float(np.max(np.abs(inner[ch.inside]))), float(np.max(np.abs(outer[~ch.inside]), initial=0.0))


def evaluate_undiscounted_exact(strategy, model, x0=0, chain=None):
    """Long-run average cost per step, ``pi_eff . (g + impulse_cost_rate)``.

    The value does not depend on ``x0``; the argument is accepted so both
    evaluators share a signature.
    """
    ch = chain or build_controlled_chain(strategy, model)
    pi = stationary_distribution(ch.kernel_eff)
    return float(pi @ (model.costs.g + ch.impulse_cost_rate))


def evaluate_discounted_exact(strategy, model, phi, x0=0, N=4096, chain=None):
    """Discount-weighted partial averages of the cost along the exact state law.

    ``value_n = [sum_{i<n} phi(i) mu_i.g + sum_{i<=n} phi(i) imp_i] / sum_{i<n} phi(i)``
    where ``mu_i`` is the post-impulse law at step ``i`` and ``imp_i`` the
    expected shift cost paid at step ``i`` (``imp_0`` is the time-zero impulse
    when ``x0`` is outside ``D``). Needs ``phi`` on ``N + 1`` steps. Returns
    ``(value_N, curve)`` with ``curve[n-1] = value_n``.
    """
    if isinstance(phi, DiscountSpec):
        phi = compute_phi(phi, model.h, N + 1)
    if isinstance(phi, PhiSequence):
        phi = phi.values
    phi = np.asarray(phi, dtype=float)
    if phi.size < N + 1:
        raise ValueError(f"phi covers {phi.size} steps, need N + 1 = {N + 1}")
    ch = chain or build_controlled_chain(strategy, model)
    g = model.costs.g
    n = model.n
    mu = np.zeros(n)
    mu[ch.entry_state[x0]] = 1.0
    running = np.empty(N)
    impulse = np.empty(N + 1)
    impulse[0] = ch.entry_cost[x0]
    for i in range(N):
        running[i] = mu @ g
        impulse[i + 1] = mu @ ch.impulse_cost_rate
        mu = mu @ ch.kernel_eff
    wr = np.cumsum(phi[:N] * running)
    wi = np.cumsum(phi[:N + 1] * impulse)[1:]
    curve = (wr + wi) / np.cumsum(phi[:N])
    return float(curve[-1]), curve


def enumerate_strategies(n, targets):
    """Every valid stationary strategy, in lexicographic order of ``(D, psi)``."""
    U = set(targets)
    out = []
    for size in range(1, n + 1):
        for D in itertools.combinations(range(n), size):
            outside = [x for x in range(n) if x not in D]
            choices = sorted(U.intersection(D))
            if outside and not choices:
                continue
            for tgt in itertools.product(choices, repeat=len(outside)):
                out.append(StationaryStrategy(D, dict(zip(outside, tgt))))
    out.sort(key=StationaryStrategy.key)
    return out


@dataclass
class OracleResult:
    lambda_star: float
    strategy_star: StationaryStrategy
    table: list  # (strategy, value) in enumeration order

    def argmins(self, tol=1e-9):
        return [s for s, v in self.table if v <= self.lambda_star + tol]

    def to_rows(self):
        return [{"D": " ".join(map(str, sorted(s.D))),
                 "psi": " ".join(f"{k}->{v}" for k, v in s.psi), "lambda": v}
                for s, v in self.table]


def brute_force_optimum(model, max_states=12, max_targets=6, tie=1e-12):
    """Exhaustive minimum of the average cost over stationary strategies.

    Ties within ``tie`` go to the lexicographically smallest ``(D, psi)``.
    """
    n, U = model.n, model.space.impulse_targets
    if n > max_states or len(U) > max_targets:
        raise SizeError(f"enumeration guard: |E|={n} (max {max_states}), |U|={len(U)} (max {max_targets})")
    table = []
    best, best_s = np.inf, None
    for s in enumerate_strategies(n, U):
        v = evaluate_undiscounted_exact(s, model)
        table.append((s, v))
        if v < best - tie:
            best, best_s = v, s
    return OracleResult(float(best), best_s, table)
