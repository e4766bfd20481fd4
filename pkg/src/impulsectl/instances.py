"""Random and reference problem instances used by tests and demos."""

import numpy as np

from .costs import CostModel, metric_cost
from .model import ImpulseModel
from .process import Kernel, StateSpace, doeblin_coefficient

TWO_STATE_P = [[0.9, 0.1], [0.2, 0.8]]


def two_state(shift_scale=1.0):
    """Two states, g = (0, 1), c(x, xi) = 0.5 + 0.4 [x != xi], h = 1."""
    c = 0.5 + 0.4 * (1 - np.eye(2))
    return ImpulseModel.build(TWO_STATE_P, [0.0, 1.0], shift_scale * c)


def random_kernel(rng, n, max_doeblin=0.95, concentration=1.0):
    """Dirichlet rows, redrawn until the Doeblin coefficient is at most ``max_doeblin``."""
    while True:
        P = rng.dirichlet(np.full(n, concentration), size=n)
        if doeblin_coefficient(P) <= max_doeblin:
            return P


def random_instance(rng, n=None, n_targets=None, h=1.0, max_doeblin=0.95):
    """Random ergodic instance with metric shift costs on a random 1-d layout.

    ``g`` is uniform on [0, 1]; ``c(x, xi) = |y_x - y_xi| + c0`` with points
    ``y`` uniform on [0, 1] and ``c0`` uniform on [0.05, 0.5].
    """
    n = int(rng.integers(4, 7)) if n is None else n
    k = int(rng.integers(2, 4)) if n_targets is None else n_targets
    U = tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))
    P = random_kernel(rng, n, max_doeblin)
    y = rng.uniform(0, 1, size=n)
    c0 = float(rng.uniform(0.05, 0.5))
    g = rng.uniform(0, 1, size=n)
    costs = metric_cost(y, [[0.0, 0.0], [1.0, 1.0]], c0, targets=U, g=g)
    return ImpulseModel(StateSpace.simple(n, U), Kernel(h, P), costs)


def random_instances(seed, count, **kw):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, **kw) for _ in range(count)]
