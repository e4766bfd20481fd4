"""Monte Carlo estimates of the long-run functionals under a stationary strategy.

Paths live on a fine grid of step ``h / fine_factor``; impulse decisions are
only taken at multiples of ``h``. Each path draws its uniforms from its own
stream, seeded by ``(seed, path index)``, so adding paths never perturbs the
existing ones.

Time-``T`` functional at checkpoint ``n`` (``T = n h``)::

    [ int_0^T beta(s) g(Y_s) ds + sum_{tau_i < T} beta(tau_i) c(Y_tau_i-, xi_i) ] / int_0^T beta

with the running integral evaluated at left endpoints of the fine cells and
``beta`` integrated exactly over each cell. The undiscounted functional is the
same routine with ``beta = 1``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .bellman import extract_strategy, solve_undiscounted
from .discounting import ConstantDiscount
from .process import kernel_from_generator

CHUNK = 512  # fine steps per block of drawn uniforms


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 10_000
    horizon_steps: int = 10_000
    seed: int = 0
    checkpoint_grid: tuple = None
    fine_factor: int = 1
    x0: int = 0

    def __post_init__(self):
        if self.n_paths < 1 or self.horizon_steps < 1:
            raise ValueError("n_paths and horizon_steps must be positive")
        if int(self.fine_factor) != self.fine_factor or self.fine_factor < 1:
            raise ValueError(f"fine_factor must be a positive integer, got {self.fine_factor}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        grid = self.checkpoint_grid
        if grid is None:
            grid = default_checkpoints(self.horizon_steps)
        grid = tuple(int(n) for n in grid)
        if not grid or list(grid) != sorted(set(grid)) or grid[0] < 1 or grid[-1] > self.horizon_steps:
            raise ValueError("checkpoints must be distinct, sorted and within 1..horizon_steps")
        object.__setattr__(self, "checkpoint_grid", grid)
        object.__setattr__(self, "fine_factor", int(self.fine_factor))

    def to_dict(self):
        return {"n_paths": self.n_paths, "horizon_steps": self.horizon_steps, "seed": self.seed,
                "checkpoint_grid": list(self.checkpoint_grid), "fine_factor": self.fine_factor,
                "x0": self.x0}


def default_checkpoints(horizon, count=20):
    """``count`` evenly spaced checkpoints ending at the horizon."""
    return sorted({max(1, round(horizon * (k + 1) / count)) for k in range(count)})


@dataclass(frozen=True)
class FunctionalEstimate:
    mean: float
    std_error: float
    per_checkpoint: tuple  # (step, mean, std_error)
    tail_sup: float
    path_values: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {"mean": self.mean, "std_error": self.std_error, "tail_sup": self.tail_sup,
                "per_checkpoint": [list(r) for r in self.per_checkpoint]}


def path_generators(seed, n_paths):
    """Independent PCG64 streams keyed by ``(seed, path index)``."""
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,))) for i in range(n_paths)]


def _fine_kernel(model, h, f):
    m = model.with_step(h)
    if f == 1:
        return m, m.P
    if model.generator is None:
        raise ValueError("fine_factor > 1 needs a generator to build the sub-step kernel")
    return m, kernel_from_generator(model.generator, h / f).matrix


def _simulate(strategy, model, beta, h, cfg):
    m, P_fine = _fine_kernel(model, h, cfg.fine_factor)
    strategy.check(m.n, m.space.impulse_targets)
    land, out = strategy.entry(m.n)
    col = {u: j for j, u in enumerate(m.space.impulse_targets)}
    shift = np.zeros(m.n)
    for x, t in strategy.psi:
        shift[x] = m.costs.c[x, col[t]]
    g = m.costs.g
    # inverse-CDF sampling: next state = number of cumulative row entries below u
    cols = [np.ascontiguousarray(c) for c in np.cumsum(P_fine, axis=1).T[:-1]]

    f = cfg.fine_factor
    total = cfg.horizon_steps * f
    dt = m.h / f
    edges = np.arange(total + 1) * dt
    weights = np.asarray(beta.integral(edges[:-1], edges[1:]), dtype=float)
    denom = np.cumsum(weights)

    gens = path_generators(cfg.seed, cfg.n_paths)
    state = np.full(cfg.n_paths, cfg.x0, dtype=np.int64)
    acc = np.zeros(cfg.n_paths)
    checkpoints = set(cfg.checkpoint_grid)
    values = {}
    draws = None
    for j in range(total):
        if j % CHUNK == 0:
            size = min(CHUNK, total - j)
            draws = np.stack([gen.random(size) for gen in gens], axis=1)
        if j % f == 0:
            i = j // f
            hit = out[state]
            if hit.any():
                acc[hit] += float(beta.beta(i * m.h)) * shift[state[hit]]
                state[hit] = land[state[hit]]
        acc += weights[j] * g[state]
        u = draws[j % CHUNK]
        nxt = np.zeros_like(state)
        for c in cols:
            nxt += c[state] < u
        state = nxt
        if (j + 1) % f == 0 and (j + 1) // f in checkpoints:
            values[(j + 1) // f] = acc / denom[j]
    return _summarise(values, cfg)


def _summarise(values, cfg):
    rows = []
    for n in cfg.checkpoint_grid:
        v = values[n]
        se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        rows.append((n, float(np.mean(v)), se))
    tail = rows[len(rows) - max(1, len(rows) // 4):]
    last = values[cfg.checkpoint_grid[-1]]
    return FunctionalEstimate(rows[-1][1], rows[-1][2], tuple(rows), max(r[1] for r in tail), last)


def simulate_undiscounted(strategy, model, h=None, cfg=None):
    """Time-averaged running plus impulse cost along simulated controlled paths."""
    cfg = cfg or SimConfig()
    return _simulate(strategy, model, ConstantDiscount(), model.h if h is None else h, cfg)


def simulate_discounted(strategy, model, beta_spec, h=None, cfg=None):
    """Discount-weighted cost normalised by the integral of beta up to each checkpoint."""
    cfg = cfg or SimConfig()
    return _simulate(strategy, model, beta_spec, model.h if h is None else h, cfg)


@dataclass
class EpsilonReport:
    rows: list
    passed: bool
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"rows": self.rows, "passed": self.passed, "notes": self.notes}


def epsilon_optimality_report(model, beta_spec, h_ladder, cfg, tol=1e-10, noise=3.0, floor=2e-2):
    """Simulate the strategy read off each rung of an h-ladder against its ``lambda_h``.

    Passes when the last gap is below ``noise`` standard errors plus ``floor``
    and no gap rises above its predecessor by more than the combined noise.
    """
    rows = []
    for h in h_ladder:
        m = model.with_step(h)
        sol = solve_undiscounted(m, tol)
        strat = extract_strategy(sol, m)
        und = simulate_undiscounted(strat, m, h, cfg)
        dis = simulate_discounted(strat, m, beta_spec, h, cfg)
        rows.append({"h": h, "lambda_h": sol.lam, "strategy": strat.to_dict(),
                     "undiscounted": und.mean, "undiscounted_se": und.std_error,
                     "discounted": dis.tail_sup, "discounted_mean": dis.mean, "discounted_se": dis.std_error,
                     "gap_undiscounted": abs(und.mean - sol.lam),
                     "gap_discounted": abs(dis.tail_sup - sol.lam)})
    notes = []
    ok = True
    for key, se in (("gap_undiscounted", "undiscounted_se"), ("gap_discounted", "discounted_se")):
        last = rows[-1]
        if last[key] > noise * last[se] + floor:
            ok = False
            notes.append(f"final {key} {last[key]:.4g} exceeds {noise} se + {floor}")
        for a, b in zip(rows, rows[1:]):
            if b[key] > a[key] + noise * math.hypot(a[se], b[se]):
                ok = False
                notes.append(f"{key} rises from h={a['h']} to h={b['h']}")
    return EpsilonReport(rows, ok, notes)
