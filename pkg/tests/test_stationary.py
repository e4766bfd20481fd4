import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impulsectl.discounting import ConstantDiscount, HyperbolicDiscount
from impulsectl.errors import SizeError, StrategyError
from impulsectl.instances import random_instance
from impulsectl.model import ImpulseModel, StationaryStrategy
from impulsectl.process import stationary_distribution
from impulsectl.stationary import (brute_force_optimum, build_controlled_chain, enumerate_strategies,
                                   evaluate_discounted_exact, evaluate_undiscounted_exact, poisson_residuals,
                                   solve_poisson)

STAR = StationaryStrategy([0], {1: 0})
NEVER = StationaryStrategy([0, 1])


def count_strategies(n, U):
    """Oracle: closed-form count of valid (D, psi) pairs."""
    total = 0
    for size in range(1, n + 1):
        for D in itertools.combinations(range(n), size):
            k = len(set(D) & set(U))
            total += k ** (n - size) if size < n else 1
    return total


def test_controlled_chain_examples(model2):
    ch = build_controlled_chain(NEVER, model2)
    np.testing.assert_array_equal(ch.kernel_eff, model2.P)
    assert not ch.impulse_cost_rate.any()
    ch = build_controlled_chain(STAR, model2)
    np.testing.assert_allclose(ch.kernel_eff[0], [1.0, 0.0])
    assert ch.impulse_cost_rate[0] == pytest.approx(0.09)


def test_controlled_chain_concentrates_on_target(rng):
    m = random_instance(rng, n=5, n_targets=2)
    u = m.space.impulse_targets[0]
    s = StationaryStrategy([u], {x: u for x in range(5) if x != u})
    ch = build_controlled_chain(s, m)
    np.testing.assert_allclose(ch.kernel_eff[:, u], 1.0)
    np.testing.assert_allclose(ch.kernel_eff.sum(axis=1), 1.0, atol=1e-12)


def test_strategy_validation(model2):
    with pytest.raises(StrategyError):
        StationaryStrategy([], {0: 1, 1: 0}).check(2, (0, 1))
    with pytest.raises(StrategyError):
        StationaryStrategy([0], {}).check(2, (0, 1))
    with pytest.raises(StrategyError):
        StationaryStrategy([0], {1: 1}).check(2, (0, 1))
    with pytest.raises(StrategyError):
        build_controlled_chain(StationaryStrategy([1], {0: 0}), model2)


def test_strategy_serialisation():
    s = StationaryStrategy([0, 2], {1: 2, 3: 0})
    assert StationaryStrategy.from_dict(s.to_dict()) == s
    assert s.to_dict() == {"D": [0, 2], "psi": {"1": 2, "3": 0}}


def test_poisson_examples(model2):
    p = solve_poisson(NEVER, model2)
    pi = stationary_distribution(model2.kernel)
    assert p.lambda_V == pytest.approx(pi @ model2.costs.g, abs=1e-10)
    p = solve_poisson(STAR, model2)
    assert p.lambda_V == pytest.approx(0.09, abs=1e-12)
    inner, outer = poisson_residuals(p, STAR, model2)
    assert inner <= 1e-10 and outer <= 1e-12
    # on D^c the value is the shift plus the landing value
    assert p.w_V[1] == pytest.approx(0.9 + p.w_V[0])


def test_poisson_shift_linearity(model2):
    base = solve_poisson(STAR, model2)
    moved = solve_poisson(STAR, model2.with_costs(model2.costs.shifted(3.0)))
    assert moved.lambda_V == pytest.approx(base.lambda_V + 3.0, abs=1e-10)
    np.testing.assert_allclose(moved.w_V, base.w_V, atol=1e-9)


def test_exact_undiscounted_examples(model2):
    assert evaluate_undiscounted_exact(NEVER, model2) == pytest.approx(1 / 3, abs=1e-12)
    assert evaluate_undiscounted_exact(STAR, model2) == pytest.approx(0.09, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), pick=st.integers(0, 10**6))
def test_poisson_agrees_with_stationary_law(seed, pick):
    m = random_instance(np.random.default_rng(seed))
    strategies = enumerate_strategies(m.n, m.space.impulse_targets)
    s = strategies[pick % len(strategies)]
    p = solve_poisson(s, m)
    assert abs(evaluate_undiscounted_exact(s, m) - p.lambda_V) <= 1e-10
    assert p.contraction_violations() == []
    assert p.iterations <= p.iteration_bound(1e-10)
    inner, outer = poisson_residuals(p, s, m)
    assert max(inner, outer) <= 1e-9


def test_exact_discounted_examples(model2):
    v, curve = evaluate_discounted_exact(NEVER, model2, ConstantDiscount(), N=4096)
    assert abs(v - 1 / 3) <= 1e-3
    v, curve = evaluate_discounted_exact(STAR, model2, HyperbolicDiscount(1, 1), N=4096)
    assert abs(v - 0.09) <= 1e-2
    assert curve.size == 4096 and curve[-1] == v


def test_exact_discounted_forgets_initial_state(rng):
    m = random_instance(rng, n=5)
    s = enumerate_strategies(m.n, m.space.impulse_targets)[-1]
    spread = []
    for N in (64, 512, 4096):
        vals = [evaluate_discounted_exact(s, m, HyperbolicDiscount(1, 0.5), x0=x, N=N)[0] for x in range(m.n)]
        spread.append(max(vals) - min(vals))
    assert spread[0] > spread[1] > spread[2]


def test_exact_discounted_needs_one_extra_weight(model2):
    with pytest.raises(ValueError):
        evaluate_discounted_exact(STAR, model2, np.ones(100), N=100)
    v, _ = evaluate_discounted_exact(STAR, model2, np.ones(101), N=100)
    assert np.isfinite(v)


def test_enumeration_two_state(model2):
    strategies = enumerate_strategies(2, (0, 1))
    assert len(strategies) == 3
    assert {s.key() for s in strategies} == {NEVER.key(), STAR.key(), StationaryStrategy([1], {0: 1}).key()}
    res = brute_force_optimum(model2)
    assert res.lambda_star == pytest.approx(0.09) and res.strategy_star == STAR


@pytest.mark.parametrize("n, U", [(3, (0,)), (4, (1, 3)), (5, (0, 2, 4)), (6, (0, 1, 2, 3, 4, 5))])
def test_enumeration_count(n, U):
    strategies = enumerate_strategies(n, U)
    assert len(strategies) == count_strategies(n, U)
    assert len({s.key() for s in strategies}) == len(strategies)
    for s in strategies:
        s.check(n, U)


def test_oracle_constant_cost():
    m = ImpulseModel.build([[0.5, 0.5, 0.0], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4]], [1.5] * 3, np.ones((3, 3)))
    res = brute_force_optimum(m)
    assert res.lambda_star == pytest.approx(1.5) and res.strategy_star.D == {0, 1, 2}


def test_oracle_size_guard(rng):
    m = random_instance(rng, n=6)
    with pytest.raises(SizeError):
        brute_force_optimum(m, max_states=5)


def test_priced_out_impulses_give_no_intervention(rng):
    for _ in range(5):
        m = random_instance(rng)
        c0 = m.costs.c.min()
        factor = m.n * np.ptp(m.costs.g) * m.h / c0 + 1.0
        res = brute_force_optimum(m.with_costs(m.costs.scaled_shift(factor)))
        assert res.strategy_star.D == set(range(m.n))
