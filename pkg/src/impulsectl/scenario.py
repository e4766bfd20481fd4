"""JSON scenario files: parsing, validation and canonical digests.

A scenario holds the state space, exactly one of ``kernel`` / ``generator``,
the cost model, a discount spec and optional solver, simulation and
experiment blocks::

    {
      "name": "two_state",
      "states": {"n": 2, "impulse_targets": [0, 1]},
      "kernel": {"h": 1.0, "matrix": [[0.9, 0.1], [0.2, 0.8]]},
      "costs": {"g": [0, 1], "c": [[0.5, 0.9], [0.9, 0.5]]},
      "discount": {"family": "hyperbolic", "h_beta": 1.0, "alpha": 0.5},
      "solver": {"tol": 1e-10, "tie_tol": 1e-9, "k_horizon": 4096},
      "simulation": {"n_paths": 10000, "horizon_steps": 10000, "seed": 1},
      "experiments": ["solve", "oracle"]
    }

A generator block reads ``{"matrix": Q, "h": 0.25, "h_ladder": [1, 0.5, ...]}``.
Shift costs may be given as a matrix ``c`` (rows are states, columns follow
the sorted targets) or as ``{"metric_cost": {"h_table": [[d, v], ...], "c0": ..., "coords": ...}}``
with coords defaulting to those of the states block.

Loading never crashes on bad input: every problem becomes a diagnostic dict
``{code, assumption, location, message}`` and they are raised together as a
``ScenarioError``. Assumption tags: A1 discount, A2 costs, A3 transition
structure, A4 ergodicity.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import CostModel, metric_cost, validate_costs
from .discounting import DiscountSpec, discount_from_dict, validate_discount
from .errors import ImpulseError, ScenarioError
from .model import ImpulseModel
from .montecarlo import SimConfig
from .process import Generator, Kernel, StateSpace, doeblin_coefficient, kernel_from_generator

EXPERIMENTS = ("solve", "solve-discounted", "oracle", "equivalence", "refine", "simulate", "report")
CONDITIONING_LIMIT = 1.0 - 1e-6
DISCOUNT_GRID = [0.0] + [2.0**k for k in range(-3, 11)]
SOLVER_DEFAULTS = {"tol": 1e-10, "tie_tol": 1e-9, "k_horizon": 4096}


@dataclass
class Scenario:
    name: str
    description: str
    model: ImpulseModel
    discount: DiscountSpec
    h_ladder: tuple
    solver: dict
    sim: SimConfig
    experiments: tuple
    digest: str
    validation: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    source: str = None

    @property
    def has_generator(self):
        return self.model.generator is not None


def canonical_digest(raw):
    """sha256 of the scenario with sorted keys and compact separators."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode()).hexdigest()


def _diag(code, location, message, assumption=None):
    return {"code": code, "assumption": assumption, "location": location, "message": message}


def _matrix(value, location, diags, code="schema"):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        diags.append(_diag(code, location, "must be a rectangular array of numbers"))
        return None
    if arr.dtype == object or not np.all(np.isfinite(arr)):
        diags.append(_diag(code, location, "entries must be finite numbers"))
        return None
    return arr


def _positive(value, location, diags):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        diags.append(_diag("schema", location, f"expected a number, got {value!r}"))
        return None
    v = float(value)
    if not v > 0 or not np.isfinite(v):
        diags.append(_diag("schema", location, f"must be positive, got {v}"))
        return None
    return v


def load_scenario(path):
    """Parse and validate a scenario file, raising ``ScenarioError`` with diagnostics."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError([_diag("io", str(path), f"cannot read scenario: {exc.strerror or exc}")])
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([_diag("parse", f"{path.name}:{exc.lineno}:{exc.colno}", exc.msg)])
    return scenario_from_dict(raw, source=str(path))


def scenario_from_dict(raw, source=None):
    diags = []
    if not isinstance(raw, dict):
        raise ScenarioError([_diag("schema", "$", "scenario must be a JSON object")])
    unknown = set(raw) - {"name", "description", "states", "kernel", "generator", "costs", "discount",
                          "solver", "simulation", "experiments"}
    for key in sorted(unknown):
        diags.append(_diag("schema", key, "unknown top-level key"))

    space = _load_states(raw.get("states"), diags)
    kernel, generator, h, ladder = _load_transitions(raw, space, diags)
    costs = _load_costs(raw.get("costs"), space, diags)
    discount = _load_discount(raw.get("discount", {"family": "constant"}), diags)
    solver = _load_solver(raw.get("solver", {}), diags)
    experiments = _load_experiments(raw.get("experiments", []), diags)
    validation, warnings = {}, []

    if discount is not None:
        rep = validate_discount(discount, [t for t in DISCOUNT_GRID if t <= discount.horizon])
        validation["discount"] = rep.to_dict()
        for msg in _failures(rep):
            diags.append(_diag("A1", "discount", msg, "A1"))
    if costs is not None:
        rep = validate_costs(costs)
        validation["costs"] = rep.to_dict()
        for msg in _failures(rep):
            diags.append(_diag("A2", "costs", msg, "A2"))
    if kernel is not None:
        L = doeblin_coefficient(kernel)
        validation["doeblin"] = {"h": h, "coefficient": L, "passed": bool(L < 1.0)}
        if L >= 1.0:
            diags.append(_diag("A4", "kernel" if generator is None else "generator",
                               f"Doeblin coefficient of the step-{h} kernel is {L:.6g}, not below 1", "A4"))
        for hh in ladder or ():
            Lh = doeblin_coefficient(kernel_from_generator(generator, hh))
            if Lh > CONDITIONING_LIMIT:
                warnings.append(f"h={hh}: Doeblin coefficient {Lh:.9f} exceeds 1 - 1e-6; "
                                "the solver will be slow and poorly conditioned")

    sim = _load_sim(raw.get("simulation", {}), space, generator, diags)
    if diags:
        raise ScenarioError(diags)
    try:
        model = ImpulseModel(space, kernel, costs, generator)
    except ImpulseError as exc:
        raise ScenarioError([_diag("schema", "$", str(exc))])
    return Scenario(str(raw.get("name", Path(source).stem if source else "scenario")),
                    str(raw.get("description", "")), model, discount, ladder, solver, sim,
                    experiments, canonical_digest(raw), validation, warnings, source)


def _failures(rep, limit=10):
    if rep.passed:
        return []
    failed = [name for name, ok in rep.checks.items() if not ok]
    return rep.failures[:limit] or [f"failed checks: {', '.join(failed)}"]


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _load_states(block, diags):
    if not isinstance(block, dict):
        diags.append(_diag("schema", "states", "missing or not an object"))
        return None
    labels = block.get("labels")
    if labels is not None and not isinstance(labels, list):
        diags.append(_diag("schema", "states.labels", "must be a list of names"))
        return None
    n = block.get("n", len(labels) if labels is not None else None)
    if not _is_int(n) or n < 1:
        diags.append(_diag("schema", "states.n", f"need a positive integer state count, got {n!r}"))
        return None
    targets = block.get("impulse_targets", list(range(n)))
    if not isinstance(targets, list) or not all(_is_int(u) for u in targets):
        diags.append(_diag("schema", "states.impulse_targets", "must be a list of state indices"))
        return None
    bad = [u for u in targets if not 0 <= u < n]
    if bad or not targets:
        diags.append(_diag("schema", "states.impulse_targets",
                           f"targets must be a nonempty subset of 0..{n - 1}; offending {bad}"))
        return None
    try:
        return StateSpace(n, tuple(labels) if labels else None, tuple(targets), block.get("coords"))
    except (ImpulseError, TypeError, ValueError) as exc:
        diags.append(_diag("schema", "states", str(exc)))
        return None


def _load_transitions(raw, space, diags):
    has_k, has_g = "kernel" in raw, "generator" in raw
    if has_k == has_g:
        diags.append(_diag("schema", "kernel|generator", "exactly one of kernel and generator is required"))
        return None, None, None, None
    n = space.n_states if space else None
    block = raw["kernel" if has_k else "generator"]
    where = "kernel" if has_k else "generator"
    if not isinstance(block, dict):
        diags.append(_diag("schema", where, "must be an object"))
        return None, None, None, None
    M = _matrix(block.get("matrix"), f"{where}.matrix", diags)
    h = _positive(block.get("h", 1.0), f"{where}.h", diags)
    if M is None or h is None:
        return None, None, None, None
    if n is not None and M.shape != (n, n):
        diags.append(_diag("schema", f"{where}.matrix", f"expected shape ({n}, {n}), got {M.shape}"))
        return None, None, None, None
    if has_k:
        try:
            return Kernel(h, M), None, h, None
        except ImpulseError as exc:
            diags.append(_diag("A3", "kernel.matrix", str(exc), "A3"))
            return None, None, None, None
    try:
        gen = Generator(M)
    except ImpulseError as exc:
        diags.append(_diag("A3", "generator.matrix", str(exc), "A3"))
        return None, None, None, None
    ladder = block.get("h_ladder")
    if ladder is not None:
        if not isinstance(ladder, list):
            diags.append(_diag("schema", "generator.h_ladder", "must be a list of step sizes"))
            return None, None, None, None
        vals = [_positive(x, f"generator.h_ladder[{i}]", diags) for i, x in enumerate(ladder)]
        if any(v is None for v in vals):
            return None, None, None, None
        if len(vals) < 3 or any(b >= a for a, b in zip(vals, vals[1:])):
            diags.append(_diag("schema", "generator.h_ladder", "needs at least 3 strictly decreasing steps"))
            return None, None, None, None
        ladder = tuple(vals)
    try:
        return kernel_from_generator(gen, h), gen, h, ladder
    except ImpulseError as exc:
        diags.append(_diag("A3", "generator", str(exc), "A3"))
        return None, None, None, None


def _load_costs(block, space, diags):
    if not isinstance(block, dict):
        diags.append(_diag("schema", "costs", "missing or not an object"))
        return None
    if space is None:
        return None
    n, U = space.n_states, space.impulse_targets
    g = _matrix(block.get("g"), "costs.g", diags)
    if g is None:
        return None
    if g.shape != (n,):
        diags.append(_diag("schema", "costs.g", f"expected {n} entries, got shape {g.shape}"))
        return None
    if "metric_cost" in block:
        spec = block["metric_cost"]
        coords = spec.get("coords", space.coords) if isinstance(spec, dict) else None
        if coords is None:
            diags.append(_diag("schema", "costs.metric_cost", "needs coords here or in the states block"))
            return None
        try:
            return metric_cost(coords, spec["h_table"], float(spec["c0"]), U, g)
        except (ImpulseError, KeyError, TypeError, ValueError) as exc:
            diags.append(_diag("A2", "costs.metric_cost", str(exc), "A2"))
            return None
    c = _matrix(block.get("c"), "costs.c", diags)
    if c is None:
        return None
    if c.shape != (n, len(U)):
        diags.append(_diag("schema", "costs.c", f"expected shape ({n}, {len(U)}), got {c.shape}"))
        return None
    for x, j in np.argwhere(c <= 0):
        diags.append(_diag("A2", f"costs.c[{x}][{j}]", f"shift cost must be positive, got {c[x, j]}", "A2"))
    if (c <= 0).any():
        return None
    c0 = block.get("c0")
    try:
        return CostModel(g, c, U, None if c0 is None else float(c0))
    except ImpulseError as exc:
        diags.append(_diag("schema", "costs", str(exc)))
        return None


def _load_discount(block, diags):
    if not isinstance(block, dict):
        diags.append(_diag("schema", "discount", "must be an object"))
        return None
    try:
        return discount_from_dict(block)
    except (ImpulseError, KeyError, TypeError, ValueError) as exc:
        diags.append(_diag("A1", "discount", str(exc), "A1"))
        return None


def _load_solver(block, diags):
    out = dict(SOLVER_DEFAULTS)
    if not isinstance(block, dict):
        diags.append(_diag("schema", "solver", "must be an object"))
        return out
    for key, val in block.items():
        if key not in out:
            diags.append(_diag("schema", f"solver.{key}", "unknown solver option"))
            continue
        v = _positive(val, f"solver.{key}", diags)
        if v is not None:
            out[key] = int(v) if key == "k_horizon" else v
    return out


def _load_experiments(items, diags):
    if not isinstance(items, list) or not all(isinstance(e, str) for e in items):
        diags.append(_diag("schema", "experiments", "must be a list of experiment names"))
        return ()
    bad = [e for e in items if e not in EXPERIMENTS]
    if bad:
        diags.append(_diag("schema", "experiments", f"unknown experiments {bad}; choose from {list(EXPERIMENTS)}"))
    return tuple(e for e in items if e in EXPERIMENTS)


def _load_sim(block, space, generator, diags):
    if not isinstance(block, dict):
        diags.append(_diag("schema", "simulation", "must be an object"))
        return None
    args = {"n_paths": block.get("n_paths", 10_000), "horizon_steps": block.get("horizon_steps", 10_000),
            "seed": block.get("seed", 0), "checkpoint_grid": block.get("checkpoints"),
            "fine_factor": block.get("fine_factor", 1), "x0": block.get("x0", 0)}
    if args["fine_factor"] != 1 and generator is None:
        diags.append(_diag("schema", "simulation.fine_factor", "a fine sub-grid needs a generator"))
        return None
    if space is not None and not (_is_int(args["x0"]) and 0 <= args["x0"] < space.n_states):
        diags.append(_diag("schema", "simulation.x0", f"initial state must be a state index, got {args['x0']!r}"))
        return None
    try:
        return SimConfig(**args)
    except (TypeError, ValueError) as exc:
        diags.append(_diag("schema", "simulation", str(exc)))
        return None
