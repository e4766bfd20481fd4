import itertools

import numpy as np
import pytest

from impulsectl.costs import CostModel, metric_cost, validate_costs
from impulsectl.errors import DomainError, ShapeError


def brute_triangle(c, U):
    """Oracle: literal loop over every (x, eta, xi)."""
    col = {u: j for j, u in enumerate(U)}
    for x, eta, xi in itertools.product(range(c.shape[0]), U, U):
        if c[x, col[xi]] > c[x, col[eta]] + c[eta, col[xi]] + 1e-12:
            return False
    return True


def test_two_state_costs_pass():
    c = 0.5 + 0.4 * (1 - np.eye(2))
    rep = validate_costs(CostModel([0, 1], c, (0, 1)))
    assert rep.passed and rep.notes["c0"] == 0.5


def test_constant_costs_pass():
    rep = validate_costs(CostModel(np.zeros(3), np.ones((3, 2)), (0, 2)))
    assert rep.passed and rep.notes["c0"] == 1.0


def test_zero_entry_fails_positivity():
    rep = validate_costs(CostModel([0, 1], [[0.5, 0.0], [0.9, 0.5]], (0, 1)))
    assert not rep.checks["positive"]


def test_triangle_violation_reported():
    c = np.array([[0.1, 1.0], [1.0, 0.1], [0.1, 5.0]])
    U = (0, 1)
    rep = validate_costs(CostModel(np.zeros(3), c, U))
    assert not rep.checks["triangle"] and not brute_triangle(c, U)
    assert any(f.startswith("c(2,1)") for f in rep.failures)


def test_declared_bound_checked():
    assert not validate_costs(CostModel([0, 0], np.full((2, 2), 0.5), (0, 1), c0=0.6)).passed


def test_shape_errors():
    with pytest.raises(ShapeError):
        CostModel([0, 1], np.ones((2, 3)), (0, 1))
    with pytest.raises(ShapeError):
        validate_costs(CostModel([0, 1], np.ones((2, 2)), (0, 1)), n_states=3)


def test_metric_cost_examples():
    c = metric_cost([0, 1, 2], [[0, 0]], 0.3)
    np.testing.assert_allclose(c.c, 0.3)
    m = metric_cost([0, 1, 2], [[0, 0], [1, 1]], 0.1)
    assert m.c[0, 2] == pytest.approx(1.1)
    assert m.c[0, 2] <= m.c[0, 1] + m.c[1, 2]


def test_metric_cost_sqrt_on_point_cloud(rng):
    pts = rng.uniform(0, 1, size=(6, 2))
    d = np.linspace(0, 2, 41)
    m = metric_cost(pts, np.column_stack([d, np.sqrt(d)]), 0.2)
    assert validate_costs(m).passed
    assert brute_triangle(m.c, m.targets)


def test_metric_cost_rejects_bad_tables():
    with pytest.raises(DomainError):
        metric_cost([0, 1], [[0, 0], [1, 0.1], [2, 1.0]], 0.1)  # h(2) > 2 h(1)
    with pytest.raises(DomainError):
        metric_cost([0, 1], [[0, 0], [1, 1]], 0.0)
    with pytest.raises(DomainError):
        metric_cost([0, 1], [[0, 0], [1, 1], [2, 0.5]], 0.1)


def test_double_impulse_never_cheaper(rng):
    # admitted costs make shifting twice at once no cheaper than shifting once
    for _ in range(20):
        pts = rng.uniform(0, 1, size=5)
        m = metric_cost(pts, [[0, 0], [1, 1]], float(rng.uniform(0.05, 0.5)), targets=(0, 2, 4))
        U = m.targets
        for x, (a, eta), (b, xi) in itertools.product(range(5), enumerate(U), enumerate(U)):
            assert m.c[x, b] < m.c[x, a] + m.c[eta, b]
