"""Impulse control of finite Markov chains under long-run average and generalised discounted costs."""

from .bellman import (BellmanSolution, DiscountedBellmanSolution, check_martingale_drift,
                      extract_strategy, solve_discounted, solve_undiscounted)
from .costs import CostModel, metric_cost, validate_costs
from .discounting import (ConstantDiscount, HyperbolicDiscount, PhiSequence, TabulatedDiscount,
                          compute_phi, eval_beta, validate_discount)
from .model import ImpulseModel, StationaryStrategy
from .montecarlo import SimConfig, simulate_discounted, simulate_undiscounted
from .process import Generator, Kernel, StateSpace, doeblin_coefficient, kernel_from_generator
from .stationary import (brute_force_optimum, evaluate_discounted_exact, evaluate_undiscounted_exact,
                         solve_poisson)

__version__ = "0.1.0"
