"""Controlled-chain model and stationary impulse strategies."""

from dataclasses import dataclass, field

import numpy as np

from .costs import CostModel, validate_costs
from .errors import ErgodicityError, ShapeError, StrategyError
from .process import Generator, Kernel, StateSpace, doeblin_coefficient, kernel_from_generator


@dataclass(frozen=True)
class ImpulseModel:
    """Everything a solver needs: states, one-step kernel, costs.

    When a generator is attached, ``with_step`` rebuilds the kernel for another
    grid step, which the refinement and Monte Carlo code rely on.
    """

    space: StateSpace
    kernel: Kernel
    costs: CostModel
    generator: Generator = None
    _lambda: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.space.n_states
        if self.kernel.n != n or self.costs.n != n:
            raise ShapeError("kernel, costs and state space disagree on the number of states")
        if tuple(self.costs.targets) != tuple(self.space.impulse_targets):
            raise ShapeError("cost columns must follow the impulse target set")
        if self.generator is not None and self.generator.n != n:
            raise ShapeError("generator size does not match the state space")
        object.__setattr__(self, "_lambda", doeblin_coefficient(self.kernel))

    @classmethod
    def build(cls, P, g, c, h=1.0, targets=None):
        """Convenience constructor from plain arrays (``c`` is n x |U|)."""
        P = np.asarray(P, dtype=float)
        n = P.shape[0]
        U = tuple(range(n)) if targets is None else tuple(sorted(targets))
        return cls(StateSpace.simple(n, U), Kernel(h, P), CostModel(g, c, U))

    @classmethod
    def from_generator(cls, space, generator, costs, h):
        return cls(space, kernel_from_generator(generator, h), costs, generator)

    def with_step(self, h):
        if self.generator is None:
            if h == self.kernel.h:
                return self
            raise ValueError("changing the grid step needs a generator")
        return ImpulseModel.from_generator(self.space, self.generator, self.costs, h)

    def with_costs(self, costs):
        return ImpulseModel(self.space, self.kernel, costs, self.generator)

    @property
    def n(self):
        return self.space.n_states

    @property
    def h(self):
        return self.kernel.h

    @property
    def P(self):
        return self.kernel.matrix

    @property
    def U(self):
        return np.asarray(self.space.impulse_targets)

    @property
    def doeblin(self):
        return self._lambda

    def require_ergodic(self):
        if self._lambda >= 1.0:
            raise ErgodicityError(
                f"Doeblin coefficient {self._lambda} of the step-{self.h} kernel is not below one",
                self._lambda)
        return self._lambda

    def validate(self):
        return validate_costs(self.costs, self.n)


@dataclass(frozen=True)
class StationaryStrategy:
    """Impulse when the chain sits outside ``D`` at a grid time, shifting it to ``psi(x)``.

    ``D = E`` with an empty ``psi`` is the strategy that never intervenes.
    """

    D: frozenset
    psi: tuple  # sorted (state, target) pairs

    def __init__(self, D, psi=None):
        object.__setattr__(self, "D", frozenset(int(x) for x in D))
        items = dict(psi or {})
        object.__setattr__(self, "psi", tuple(sorted((int(k), int(v)) for k, v in items.items())))

    @property
    def shift(self):
        return dict(self.psi)

    def key(self):
        """Lexicographic ordering key used for deterministic tie-breaks."""
        return (tuple(sorted(self.D)), self.psi)

    def check(self, n, targets):
        """Raise ``StrategyError`` unless psi maps exactly D^c into D and U."""
        if not self.D or any(x < 0 or x >= n for x in self.D):
            raise StrategyError(f"continuation set {sorted(self.D)} must be a nonempty subset of 0..{n - 1}")
        outside = set(range(n)) - self.D
        shift = self.shift
        if set(shift) != outside:
            raise StrategyError(f"psi must be defined exactly on D^c = {sorted(outside)}, got {sorted(shift)}")
        allowed = self.D & set(targets)
        bad = {x: t for x, t in shift.items() if t not in allowed}
        if bad:
            raise StrategyError(f"psi must map into D and U; offending shifts {bad}")
        return self

    def entry(self, n):
        """Arrays (landing state, is-impulse) for every state at a grid time."""
        land = np.arange(n)
        for x, t in self.psi:
            land[x] = t
        mask = np.ones(n, dtype=bool)
        mask[list(self.D)] = False
        return land, mask

    def to_dict(self):
        return {"D": sorted(self.D), "psi": {str(k): v for k, v in self.psi}}

    @classmethod
    def from_dict(cls, d):
        return cls(d["D"], {int(k): int(v) for k, v in d.get("psi", {}).items()})

    def __str__(self):
        psi = ", ".join(f"{k}->{v}" for k, v in self.psi)
        return f"D={sorted(self.D)} psi={{{psi}}}"
