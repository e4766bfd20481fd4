"""Average-cost Bellman equations for impulse control on a time grid.

The one-step operator merges "continue" and "shift then continue" into a
single minimisation over ``U + {x}``::

    F v(x) = min over xi in U + {x} of  phi*cbar(x, xi)/h + phi*g(xi) + (P v)(xi)

with ``cbar(x, x) = 0``. Under a Doeblin coefficient ``L < 1`` the operator
contracts the span seminorm by ``L``, which gives both the relative value
iteration for the undiscounted equation and the backward recursion for the
time-dependent discounted one.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .discounting import DiscountSpec, PhiSequence, compute_phi
from .errors import ConvergenceError, DegenerateTieError, ErgodicityError
from .model import StationaryStrategy
from .process import span

REF = 0
DEFAULT_TOL = 1e-10
DEFAULT_TIE_TOL = 1e-9
MAX_ITER = 1_000_000


def apply_M(w, phi_k, model):
    """Cheapest shift: ``min over xi in U of phi_k*c(x, xi)/h + w(xi)``.

    Returns the values and the minimising target per state; ties go to the
    lowest state index.
    """
    w = np.asarray(w, dtype=float)
    vals = phi_k * model.costs.c / model.h + w[model.U][None, :]
    j = np.argmin(vals, axis=1)
    return vals[np.arange(model.n), j], model.U[j]


def _candidates(v, phi_k, model):
    """Matrix of F-candidates: column 0 continues, column j shifts to U[j-1]."""
    cont = phi_k * model.costs.g + model.P @ v
    shift = phi_k * model.costs.c / model.h + cont[model.U][None, :]
    return np.column_stack([cont, shift])


def one_step(v, phi_k, model):
    """``F v`` for the given discount weight."""
    return _candidates(v, phi_k, model).min(axis=1)


@dataclass(frozen=True)
class BellmanSolution:
    w: np.ndarray
    lam: float
    residual: float
    iterations: int
    contraction_factor: float
    spans: np.ndarray = field(repr=False)
    h: float = 1.0

    @property
    def lambda_(self):
        return self.lam

    def iteration_bound(self, tol):
        return iteration_bound(self.spans, self.contraction_factor, tol)

    def contraction_violations(self, rel=1e-12):
        return contraction_violations(self.spans, self.contraction_factor, rel)


def iteration_bound(spans, L, tol):
    """Worst-case sweep count from geometric decay of the first span."""
    s0 = spans[0] if len(spans) else 0.0
    if s0 <= tol or L <= 0:
        return 2
    return math.ceil(math.log(tol / s0) / math.log(L)) + 2


def contraction_violations(spans, L, rel=1e-12):
    """Indices where a recorded span fails to shrink by the factor ``L``."""
    s = np.asarray(spans)
    bad = np.nonzero(s[1:] > L * s[:-1] * (1 + rel))[0]
    return [(int(i), float(s[i]), float(s[i + 1])) for i in bad]


def bellman_residual(w, lam, model):
    """Sup-norm residual of ``w = min(g - lam + P w, M w)``."""
    cont = model.costs.g - lam + model.P @ w
    Mw, _ = apply_M(w, 1.0, model)
    return float(np.max(np.abs(np.minimum(cont - w, Mw - w))))


def solve_undiscounted(model, tol=DEFAULT_TOL, max_iter=MAX_ITER):
    """Relative value iteration for the undiscounted equation.

    The iteration tracks successive differences ``d_t = v_{t+1} - v_t``
    directly: the change of each candidate is ``P d_t`` and the change of the
    minimum is recovered from the candidate gaps, so the recorded spans keep
    full relative precision down to the stopping level. Stops once
    ``span(d_t) <= tol``: the midpoint estimate of lambda is then within
    ``tol / 2`` and the residual is certified by a final exact sweep. The
    distance of ``w`` to the fixed point is at most ``tol / (1 - L)``.
    """
    L = model.require_ergodic()
    n = model.n
    U = model.U
    cand = _candidates(np.zeros(n), 1.0, model)
    Fv = cand.min(axis=1)
    v = Fv - Fv[REF]
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
            raise ConvergenceError(f"relative value iteration hit the cap of {max_iter} sweeps", s, it)
        Pd = model.P @ d
        delta = np.column_stack([Pd, np.broadcast_to(Pd[U], (n, U.size))])
        gaps = cand - cand.min(axis=1, keepdims=True)
        change = (gaps + delta).min(axis=1)
        cand = cand + delta
        d = change - change[REF]
        v = v + d
        it += 1
    w = v - v[REF]
    e = one_step(w, 1.0, model) - w
    lam = 0.5 * (e.max() + e.min())
    residual = max(0.5 * span(e), bellman_residual(w, lam, model))
    return BellmanSolution(w, float(lam), float(residual), it, L, np.asarray(spans), model.h)


@dataclass(frozen=True)
class DiscountedBellmanSolution:
    """Time-indexed relative values ``w_d(k, .)`` and constants ``lambda_d(k)``, k < K.

    ``w_tail`` is ``w_d(K, .)`` so one-step identities can be checked at
    ``k = K - 1``. ``tail_bound`` bounds the effect of the zero terminal
    condition placed ``buffer`` steps past the horizon.
    """

    w_d: np.ndarray
    lambda_d: np.ndarray
    phi: np.ndarray
    w_tail: np.ndarray
    K: int
    buffer: int
    residual: float
    tail_bound: float
    contraction_factor: float
    h: float = 1.0

    def weighted_lambda(self, n=None):
        """``sum phi(i) lambda_d(i) / sum phi(i)`` over ``i < n``."""
        n = self.K if n is None else int(n)
        p = self.phi[:n]
        return float(np.dot(p, self.lambda_d[:n]) / p.sum())

    def weighted_curve(self):
        return np.cumsum(self.phi * self.lambda_d) / np.cumsum(self.phi)

    def w_next(self, k):
        return self.w_d[k + 1] if k + 1 < self.K else self.w_tail


def discounted_buffer(model, tol):
    """Extra backward steps so the zero terminal condition costs at most ``tol``."""
    L = model.doeblin
    g_sp = span(model.costs.g)
    bound = (g_sp + float(np.max(np.abs(model.costs.c))) / model.h) / (1.0 - L)
    if L == 0.0 or 2.0 * bound <= tol:
        return 1, bound
    return max(1, math.ceil(math.log(tol / (2.0 * bound)) / math.log(L))), bound


def solve_discounted(model, phi, K=4096, tol=DEFAULT_TOL, buffer=None):
    """Backward recursion for the discounted, time-dependent equation.

    ``phi`` is a discount spec or a precomputed sequence covering at least
    ``K + buffer`` steps. From ``w_d(K + B, .) = 0`` each step applies ``F``
    with weight ``phi(k)`` and fixes the gauge ``w_d(k, 0) = 0``, which
    defines ``lambda_d(k) = F w_d(k+1, .)(0) / phi(k)``.
    """
    L = model.require_ergodic()
    B_auto, bound = discounted_buffer(model, tol)
    B = B_auto if buffer is None else int(buffer)
    total = K + B
    if isinstance(phi, DiscountSpec):
        phi = compute_phi(phi, model.h, total)
    if isinstance(phi, PhiSequence):
        if abs(phi.h - model.h) > 1e-12 * model.h:
            raise ValueError(f"phi was built for step {phi.h}, model uses {model.h}")
        phi = phi.values
    phi = np.asarray(phi, dtype=float)
    if phi.size < total:
        raise ValueError(f"phi covers {phi.size} steps, need K + buffer = {total}")
    n = model.n
    w_d = np.empty((K + 1, n))
    lam = np.empty(K)
    nxt = np.zeros(n)
    for k in range(total - 1, -1, -1):
        Fv = one_step(nxt, phi[k], model)
        if k < K:
            lam[k] = Fv[REF] / phi[k]
        nxt = Fv - Fv[REF]
        if k <= K:
            w_d[k] = nxt
    if K + B == K:
        w_d[K] = 0.0
    tail = 2.0 * bound * L**B
    sol = DiscountedBellmanSolution(w_d[:K].copy(), lam, phi[:K].copy(), w_d[K].copy(), K, B,
                                    0.0, float(tail), L, model.h)
    return _with_residual(sol, model)


def _discounted_terms(sol, model):
    """Per-(k, x) drift and shift gap of a discounted solution."""
    g = model.costs.g
    nxt = np.vstack([sol.w_d[1:], sol.w_tail[None, :]])
    drift = sol.phi[:, None] * (g[None, :] - sol.lambda_d[:, None]) + nxt @ model.P.T - sol.w_d
    shift = (sol.phi[:, None, None] * model.costs.c[None, :, :] / model.h
             + sol.w_d[:, model.U][:, None, :]).min(axis=2)
    return drift, shift - sol.w_d


def _with_residual(sol, model):
    drift, mgap = _discounted_terms(sol, model)
    res = float(np.max(np.abs(np.minimum(drift, mgap))))
    return DiscountedBellmanSolution(sol.w_d, sol.lambda_d, sol.phi, sol.w_tail, sol.K, sol.buffer,
                                     res, sol.tail_bound, sol.contraction_factor, sol.h)


def extract_strategy(sol, model, tie_tol=DEFAULT_TIE_TOL):
    """Stationary strategy read off an undiscounted solution.

    Continue where ``g - lambda + P w`` beats the cheapest shift by more than
    ``tie_tol``; elsewhere shift to the minimiser of ``M w``.
    """
    if sol.residual > tie_tol:
        raise ValueError(f"solution residual {sol.residual:.3e} exceeds tie tolerance {tie_tol:.3e}")
    w = sol.w
    cont = model.costs.g - sol.lam + model.P @ w
    Mw, arg = apply_M(w, 1.0, model)
    inside = cont < Mw - tie_tol
    D = set(np.nonzero(inside)[0].tolist())
    psi = {int(x): int(arg[x]) for x in np.nonzero(~inside)[0]}
    bad = {x: t for x, t in psi.items() if t not in D}
    if bad:
        x = next(iter(bad))
        cycle = [x]
        while cycle[-1] in psi and psi[cycle[-1]] not in cycle:
            cycle.append(psi[cycle[-1]])
        raise DegenerateTieError(
            f"shift targets {bad} fall outside the continuation set; retry with a smaller tie_tol",
            cycle)
    return StationaryStrategy(D, psi)


@dataclass
class DriftReport:
    min_drift: float
    max_continuation_drift: float
    min_shift_gap: float
    threshold: float
    violations: list

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {"min_drift": self.min_drift, "max_continuation_drift": self.max_continuation_drift,
                "min_shift_gap": self.min_shift_gap, "threshold": self.threshold,
                "violations": [list(v) for v in self.violations[:50]], "passed": self.passed}


def check_martingale_drift(sol, model, threshold=1e-8, tie_tol=DEFAULT_TIE_TOL):
    """One-step drift of the value process along the uncontrolled chain.

    ``drift(k, x) = phi(k)(g(x) - lambda_d(k)) + E_x w_d(k+1, X_h) - w_d(k, x)``
    must be nonnegative everywhere (submartingale) and vanish on the
    continuation region (stopped martingale). States where ``w`` exceeds its
    cheapest shift are flagged as well. For an undiscounted solution the same
    check runs with ``phi = 1`` and constant lambda; violations are reported
    as ``(k, x, kind)`` with ``k = 0``.
    """
    if isinstance(sol, BellmanSolution):
        w = sol.w
        drift = (model.costs.g - sol.lam + model.P @ w - w)[None, :]
        Mw, _ = apply_M(w, 1.0, model)
        mgap = (Mw - w)[None, :]
    else:
        drift, mgap = _discounted_terms(sol, model)
    inside = drift < mgap - tie_tol
    violations = []
    for k, x in np.argwhere(drift < -threshold):
        violations.append((int(k), int(x), "negative drift"))
    for k, x in np.argwhere(inside & (np.abs(drift) > threshold)):
        violations.append((int(k), int(x), "continuation drift"))
    for k, x in np.argwhere(mgap < -threshold):
        violations.append((int(k), int(x), "value above shift"))
    cont_drift = np.abs(drift[inside])
    return DriftReport(float(drift.min()), float(cont_drift.max()) if cont_drift.size else 0.0,
                       float(mgap.min()), threshold, sorted(set(violations)))
