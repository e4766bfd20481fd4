"""Discount functions and their step-averaged discrete sequences.

A discount function ``beta`` maps elapsed time to a weight in (0, 1]. For a
grid step ``h`` the discrete sequence is the average of ``beta`` over each
grid cell, ``phi_h(i) = (1/h) * integral of beta over [ih, (i+1)h]``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ExtrapolationError, NumericError
from .validation import ValidationReport

SUPERMULT_SLACK = 1e-12


class DiscountSpec:
    """Base class for the supported discount families."""

    family = "abstract"
    description = ""

    def beta(self, t):
        raise NotImplementedError

    def integral(self, a, b):
        """Integral of beta over [a, b] for 0 <= a <= b."""
        raise NotImplementedError

    @property
    def horizon(self):
        """Largest time at which beta is defined."""
        return math.inf

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantDiscount(DiscountSpec):
    """beta identically one, i.e. no discounting."""

    description: str = "no discounting"
    family = "constant"

    def beta(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def integral(self, a, b):
        return np.asarray(b, dtype=float) - np.asarray(a, dtype=float)

    def to_dict(self):
        return {"family": "constant"}


@dataclass(frozen=True)
class HyperbolicDiscount(DiscountSpec):
    """Generalised hyperbolic discount ``beta(t) = (1 + rate*t) ** -alpha``."""

    rate: float = 1.0
    alpha: float = 1.0
    description: str = ""
    family = "hyperbolic"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise DomainError(f"hyperbolic rate must be positive, got {self.rate}")
        if not (0 < self.alpha <= 1):
            raise DomainError(f"hyperbolic exponent must lie in (0, 1], got {self.alpha}")

    def beta(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-self.alpha * np.log1p(self.rate * t))

    def integral(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        u = 1.0 + self.rate * a
        x = self.rate * (b - a) / u
        if self.alpha == 1.0:
            return np.log1p(x) / self.rate
        # difference of antiderivatives written to avoid cancellation far out
        p = 1.0 - self.alpha
        return u**p * np.expm1(p * np.log1p(x)) / (self.rate * p)

    def to_dict(self):
        return {"family": "hyperbolic", "h_beta": self.rate, "alpha": self.alpha}


@dataclass(frozen=True)
class TabulatedDiscount(DiscountSpec):
    """Piecewise-linear interpolation of sampled ``(t, beta(t))`` pairs.

    The first knot must sit at ``t = 0``. Queries past the last knot raise.
    """

    times: tuple = ()
    values: tuple = ()
    description: str = ""
    family = "tabulated"
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise DomainError("tabulated discount needs at least two (t, beta) pairs")
        if t[0] != 0.0:
            raise DomainError("tabulated discount must start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise DomainError("tabulated discount times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise DomainError("tabulated discount values must be finite")
        object.__setattr__(self, "times", tuple(t.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))
        seg = 0.5 * np.diff(t) * (v[:-1] + v[1:])
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg)]))

    @classmethod
    def from_points(cls, points, description=""):
        pts = [tuple(p) for p in points]
        return cls(tuple(p[0] for p in pts), tuple(p[1] for p in pts), description)

    @property
    def horizon(self):
        return self.times[-1]

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.times[-1] * (1 + 1e-14)):
            raise ExtrapolationError(
                f"tabulated discount queried at t={float(np.max(t))} beyond grid end {self.times[-1]}")
        return np.minimum(t, self.times[-1])

    def beta(self, t):
        return np.interp(self._check(t), self.times, self.values)

    def _antiderivative(self, t):
        t = self._check(t)
        knots = np.asarray(self.times)
        vals = np.asarray(self.values)
        j = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, knots.size - 2)
        dt = t - knots[j]
        slope = (vals[j + 1] - vals[j]) / (knots[j + 1] - knots[j])
        return self._cum[j] + dt * vals[j] + 0.5 * slope * dt * dt

    def integral(self, a, b):
        return self._antiderivative(b) - self._antiderivative(a)

    def to_dict(self):
        return {"family": "tabulated", "points": [[t, b] for t, b in zip(self.times, self.values)]}


def discount_from_dict(d):
    """Build a discount spec from its scenario-file form."""
    family = d.get("family")
    if family == "constant":
        return ConstantDiscount()
    if family == "hyperbolic":
        return HyperbolicDiscount(float(d.get("h_beta", 1.0)), float(d.get("alpha", 1.0)))
    if family == "tabulated":
        return TabulatedDiscount.from_points(d["points"])
    raise DomainError(f"unknown discount family {family!r}")


def eval_beta(spec, t):
    """Evaluate beta at ``t >= 0`` (scalar or array)."""
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"discount function is defined for t >= 0 only, got {t}")
    out = spec.beta(arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PhiSequence:
    """Step-averaged discount weights ``phi_h(0..K-1)``."""

    h: float
    values: np.ndarray

    @property
    def K(self):
        return int(self.values.size)

    def __len__(self):
        return self.K

    def __getitem__(self, i):
        return self.values[i]

    def partial_sums(self):
        return np.cumsum(self.values)

    def invariant_violations(self, slack=SUPERMULT_SLACK):
        """Return a list of violated invariants (empty when all hold)."""
        v = self.values
        out = []
        if not np.all(v > 0):
            out.append("phi has non-positive entries")
        if v[0] > 1 + slack:
            out.append(f"phi(0) = {v[0]!r} exceeds 1")
        bad = np.nonzero(np.diff(v) > slack)[0]
        if bad.size:
            out.append(f"phi increases at index {int(bad[0])}")
        K = v.size
        for i in range(K):
            k = np.arange(K - i)
            gap = v[i + k] - v[i] * v[k]
            if np.any(gap < -slack):
                kk = int(k[np.argmin(gap)])
                out.append(f"supermultiplicativity fails at (i, k) = ({i}, {kk})")
                break
        return out


def compute_phi(spec, h, K):
    """Discrete discount sequence ``phi_h(0..K-1)`` from closed-form cell integrals."""
    if not (h > 0 and math.isfinite(h)):
        raise DomainError(f"grid step must be positive, got {h}")
    K = int(K)
    if K < 1:
        raise DomainError(f"horizon must be at least one step, got {K}")
    if isinstance(spec, ConstantDiscount):
        return PhiSequence(float(h), np.ones(K))
    left = np.arange(K, dtype=float) * h
    vals = np.asarray(spec.integral(left, left + h), dtype=float) / h
    if not np.all(np.isfinite(vals)):
        raise NumericError("discount cell integrals are not finite")
    return PhiSequence(float(h), vals)


def validate_discount(spec, sample_grid):
    """Check the discount assumptions on a sample grid.

    Monotonicity, ``beta(0) = 1``, range and supermultiplicativity are checked
    on the grid (pairs whose sum leaves a tabulated domain are skipped). The
    divergence of the integral of beta is decided analytically for the closed
    families and marked unverifiable for tabulated data.
    """
    grid = np.asarray(sample_grid, dtype=float)
    rep = ValidationReport("discount")
    if grid.size == 0 or np.any(np.diff(grid) < 0) or np.any(grid < 0):
        rep.record("grid", False, ["sample grid must be nonempty, sorted and nonnegative"])
        return rep
    grid = grid[grid <= spec.horizon]
    b = spec.beta(grid)
    b0 = float(spec.beta(0.0))
    rep.record("beta_at_zero", abs(b0 - 1.0) <= 1e-15, [] if abs(b0 - 1.0) <= 1e-15 else [f"beta(0) = {b0}"])
    in_range = (b > 0) & (b <= 1)
    rep.record("range", np.all(in_range),
               [f"beta({t}) = {v} outside (0, 1]" for t, v in zip(grid[~in_range], b[~in_range])])
    inc = np.nonzero(np.diff(b) > 0)[0]
    rep.record("monotone", inc.size == 0,
               [f"beta increases between t={grid[i]} and t={grid[i + 1]}" for i in inc])
    fails = []
    for i, t in enumerate(grid):
        s = grid[i:]
        s = s[t + s <= spec.horizon]
        if s.size == 0:
            continue
        lhs = spec.beta(t + s)
        rhs = b[i] * spec.beta(s)
        for sv in s[lhs < rhs - SUPERMULT_SLACK]:
            fails.append(f"beta({t}+{sv}) < beta({t}) beta({sv})")
    rep.record("supermultiplicative", not fails, fails)
    if isinstance(spec, (ConstantDiscount, HyperbolicDiscount)):
        rep.notes["divergent_integral"] = "analytic"
    else:
        rep.notes["divergent_integral"] = "unverifiable"
    return rep
