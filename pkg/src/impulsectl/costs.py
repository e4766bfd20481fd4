"""Running and shift costs.

``g`` is a cost rate (minimised) over the states. ``c[x, j]`` is the price of
shifting from state ``x`` to the ``j``-th impulse target, so columns follow the
sorted target tuple ``targets``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .validation import ValidationReport

TRIANGLE_SLACK = 1e-12


@dataclass(frozen=True)
class CostModel:
    g: np.ndarray
    c: np.ndarray
    targets: tuple
    c0: float = None

    def __post_init__(self):
        g = np.array(self.g, dtype=float).ravel()
        c = np.array(self.c, dtype=float)
        targets = tuple(int(u) for u in self.targets)
        if c.ndim != 2 or c.shape != (g.size, len(targets)):
            raise ShapeError(f"shift cost must be {g.size}x{len(targets)}, got {c.shape}")
        if list(targets) != sorted(set(targets)):
            raise ShapeError("impulse targets must be sorted and distinct")
        if targets and (targets[0] < 0 or targets[-1] >= g.size):
            raise ShapeError("impulse targets outside the state range")
        g.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "targets", targets)
        if self.c0 is None:
            object.__setattr__(self, "c0", float(c.min()))

    @property
    def n(self):
        return self.g.size

    def shifted(self, const):
        """Same shift costs, running cost moved by a constant."""
        return CostModel(self.g + const, self.c, self.targets, self.c0)

    def scaled_shift(self, factor):
        return CostModel(self.g, self.c * factor, self.targets, self.c0 * factor)


def validate_costs(m, n_states=None):
    """Exhaustive check of positivity, the lower bound and the triangle inequality.

    Every triple ``(x, eta, xi)`` with ``eta, xi`` impulse targets is checked:
    ``c(x, xi) <= c(x, eta) + c(eta, xi)``. The tightest admissible lower bound
    ``min c`` is reported in ``notes["c0"]``.
    """
    if n_states is not None and m.n != n_states:
        raise ShapeError(f"cost model has {m.n} states, state space has {n_states}")
    rep = ValidationReport("costs")
    g, c, U = m.g, m.c, np.asarray(m.targets)
    rep.record("finite", np.all(np.isfinite(g)) and np.all(np.isfinite(c)),
               [] if np.all(np.isfinite(g)) and np.all(np.isfinite(c)) else ["costs must be finite"])
    tight = float(c.min()) if c.size else float("nan")
    rep.notes["c0"] = tight
    bad = np.argwhere(c <= 0)
    rep.record("positive", bad.size == 0,
               [f"c({x}, {U[j]}) = {c[x, j]} is not positive" for x, j in bad])
    if m.c0 is not None:
        ok = m.c0 > 0 and tight >= m.c0
        rep.record("lower_bound", ok, [] if ok else [f"declared c0 = {m.c0} but min c = {tight}"])
    # through[x, e, j] = c(x, eta_e) + c(eta_e, xi_j)
    through = c[:, :, None] + c[U, :][None, :, :]
    slack = through - c[:, None, :]
    viol = np.argwhere(slack < -TRIANGLE_SLACK)
    rep.record("triangle", viol.size == 0,
               [f"c({x},{U[j]}) = {c[x, j]:.6g} > c({x},{U[e]}) + c({U[e]},{U[j]}) = {through[x, e, j]:.6g}"
                for x, e, j in viol])
    return rep


def _table_fn(table):
    t = np.asarray(table, dtype=float)
    if t.ndim != 2 or t.shape[1] != 2 or t.shape[0] < 1:
        raise DomainError("function table must be a list of [d, value] pairs")
    order = np.argsort(t[:, 0])
    d, v = t[order, 0], t[order, 1]
    if d[0] != 0.0 or v[0] != 0.0:
        raise DomainError("function table must start at (0, 0)")
    if np.any(np.diff(d) <= 0):
        raise DomainError("function table abscissae must be distinct")
    return d, v


def metric_cost(coords, h_table, c0, targets=None, g=None):
    """Shift costs ``c(x, xi) = h(|x - xi|) + c0`` from a subadditive table.

    ``h`` interpolates the table linearly and is held constant past its last
    entry. The table must be nondecreasing and subadditive on sums of its own
    abscissae; the resulting model is validated before it is returned.
    """
    if not c0 > 0:
        raise DomainError(f"c0 must be positive, got {c0}")
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    n = coords.shape[0]
    d, v = _table_fn(h_table)
    if np.any(np.diff(v) < 0) or np.any(v < 0):
        raise DomainError("h must be nonnegative and nondecreasing")

    def h(x):
        return np.interp(x, d, v)

    sums = d[:, None] + d[None, :]
    if np.any(h(sums) > h(d)[:, None] + h(d)[None, :] + TRIANGLE_SLACK):
        raise DomainError("h is not subadditive on the table")
    U = tuple(range(n)) if targets is None else tuple(sorted(int(u) for u in targets))
    dist = np.linalg.norm(coords[:, None, :] - coords[None, list(U), :], axis=2)
    g0 = np.zeros(n) if g is None else np.asarray(g, dtype=float)
    model = CostModel(g0, h(dist) + c0, U, float(c0))
    rep = validate_costs(model)
    if not rep.passed:
        raise DomainError("metric cost violates its assumptions: " + "; ".join(rep.failures[:3]))
    return model

