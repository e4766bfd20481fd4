"""Finite-state Markov dynamics: kernels, generators, ergodicity."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConvergenceError, DomainError, ErgodicityError, NumericError, ShapeError

STOCHASTIC_TOL = 1e-12
POISSON_TAIL = 1e-12


def span(v):
    """Span seminorm max(v) - min(v)."""
    v = np.asarray(v)
    return float(v.max() - v.min()) if v.size else 0.0


@dataclass(frozen=True)
class StateSpace:
    n_states: int
    labels: tuple
    impulse_targets: tuple
    coords: np.ndarray = None

    def __post_init__(self):
        n = int(self.n_states)
        if n < 1:
            raise DomainError("state space needs at least one state")
        labels = tuple(str(x) for x in (self.labels or range(n)))
        if len(labels) != n or len(set(labels)) != n:
            raise DomainError("state labels must be distinct, one per state")
        targets = tuple(sorted({int(u) for u in self.impulse_targets}))
        if not targets:
            raise DomainError("impulse target set U must be nonempty")
        if targets[0] < 0 or targets[-1] >= n:
            raise DomainError(f"impulse targets {targets} outside 0..{n - 1}")
        object.__setattr__(self, "n_states", n)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "impulse_targets", targets)
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != n:
                raise ShapeError("coords must have one point per state")
            object.__setattr__(self, "coords", coords)

    @classmethod
    def simple(cls, n, targets=None, coords=None):
        return cls(n, tuple(range(n)), tuple(range(n)) if targets is None else tuple(targets), coords)

    @property
    def U(self):
        return self.impulse_targets


def _as_square(matrix, name):
    m = np.array(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{name} has non-finite entries")
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class Kernel:
    """One-step transition matrix P_h of a chain observed every ``h`` time units."""

    h: float
    matrix: np.ndarray

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise DomainError(f"kernel step must be positive, got {self.h}")
        m = _as_square(self.matrix, "kernel")
        if np.any(m < 0) or np.any(m > 1):
            raise DomainError("kernel entries must lie in [0, 1]")
        dev = np.max(np.abs(m.sum(axis=1) - 1.0))
        if dev > STOCHASTIC_TOL:
            raise DomainError(f"kernel rows must sum to one (max deviation {dev:.3e})")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "matrix", m)

    @property
    def n(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Generator:
    """Rate matrix Q of a continuous-time chain."""

    matrix: np.ndarray

    def __post_init__(self):
        q = _as_square(self.matrix, "generator")
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            raise DomainError("generator off-diagonal rates must be nonnegative")
        if np.any(np.abs(q.sum(axis=1)) > STOCHASTIC_TOL):
            raise DomainError("generator rows must sum to zero")
        object.__setattr__(self, "matrix", q)

    @property
    def n(self):
        return self.matrix.shape[0]


MAX_UNIFORM_RATE = 64.0  # Poisson mean above which the step is halved and squared


def kernel_from_generator(gen, h):
    """Transition matrix exp(hQ) by uniformization.

    With ``q = max |Q_ii|`` and ``R = I + Q/q``, exp(hQ) is the Poisson(qh)
    mixture of powers of ``R``; the series is cut once the Poisson tail mass
    drops below 1e-12. Large ``qh`` is split into ``2**s`` equal steps whose
    kernel is squared ``s`` times, keeping the series short.
    """
    if not (h > 0 and math.isfinite(h)):
        raise DomainError(f"kernel step must be positive, got {h}")
    Q = gen.matrix
    n = Q.shape[0]
    q = float(np.max(-np.diag(Q)))
    if q == 0.0:
        return Kernel(h, np.eye(n))
    mu = q * h
    if mu > MAX_UNIFORM_RATE:
        s = math.ceil(math.log2(mu / MAX_UNIFORM_RATE))
        P = kernel_from_generator(gen, h / 2**s).matrix
        for _ in range(s):
            P = P @ P
            P /= P.sum(axis=1, keepdims=True)
        return Kernel(h, P)
    R = np.eye(n) + Q / q
    np.clip(R, 0.0, None, out=R)
    kmax = int(stats.poisson.isf(POISSON_TAIL, mu)) + 1
    while stats.poisson.sf(kmax, mu) >= POISSON_TAIL:
        kmax += 1
    weights = stats.poisson.pmf(np.arange(kmax + 1), mu)
    P = np.zeros((n, n))
    term = np.eye(n)
    for k in range(kmax + 1):
        if weights[k] > 0:
            P += weights[k] * term
        term = term @ R
    if not np.all(np.isfinite(P)):
        raise NumericError("uniformization produced non-finite entries")
    # absorb the truncated tail mass (< 1e-12) so rows stay stochastic
    P /= P.sum(axis=1, keepdims=True)
    return Kernel(h, P)


def doeblin_coefficient(kernel):
    """Largest total-variation distance between two rows of the kernel."""
    P = kernel.matrix if isinstance(kernel, Kernel) else np.asarray(kernel, dtype=float)
    tv = 0.5 * np.abs(P[:, None, :] - P[None, :, :]).sum(axis=2)
    return float(min(1.0, tv.max()))


def stationary_distribution(kernel, tol=1e-13, max_iter=10_000_000):
    """Invariant law of an ergodic kernel by power iteration from the uniform law."""
    P = kernel.matrix if isinstance(kernel, Kernel) else np.asarray(kernel, dtype=float)
    lam = doeblin_coefficient(P)
    if lam >= 1.0:
        raise ErgodicityError(f"Doeblin coefficient {lam} is not below one", lam)
    n = P.shape[0]
    pi = np.full(n, 1.0 / n)
    for it in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        change = np.abs(nxt - pi).sum()
        pi = nxt
        if change < tol:
            break
    else:
        raise ConvergenceError("power iteration did not settle", change, max_iter)
    return pi
