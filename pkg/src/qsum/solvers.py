"""Incremental quasi-subgradient solvers and their per-iteration diagnostics.

Four methods share one run loop:

* ``incsgm``   cyclic incremental method that skips components already at
               their own optimum,
* ``randsgm``  randomized variant taking one step along a component drawn
               uniformly from those not yet optimal,
* ``classical`` cyclic incremental method without the skip (kept as a foil),
* ``sgpm``     cyclic subgradient projection for feasibility problems with a
               per-component dynamic stepsize (baseline).

Component indices are 0-based throughout.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolationError, DegenerateDirectionError, InvalidArgumentError
from .problem import (
    DEFAULT_TOL_OPT,
    ComponentFunction,
    OptimumMeta,
    SumProblem,
    as_point,
    component_values,
    is_at_component_optimum,
)
from .stepsize import Gamma, StepsizeRule, _gamma_at, c_pm, is_dynamic, next_stepsize, r_pm

UNIT_TOL = 1e-12
CONE_TOL = 1e-9
BASIC_SLACK = 1e-7

Selector = Callable[[int, ComponentFunction, np.ndarray], np.ndarray]


class Status(str, enum.Enum):
    TARGET_REACHED = "target_reached"
    MAX_ITERATIONS = "max_iterations"
    STALLED = "stalled"


class Reorder(str, enum.Enum):
    FIXED = "fixed"
    SHUFFLE = "shuffle"
    SHIFT = "shift"


@dataclass(frozen=True)
class StopCriteria:
    """When to stop a run.

    ``target_gap`` is only used when the problem's optimal value is known;
    ``stall_window`` stops a run whose best value has not improved for that
    many iterations.
    """

    max_iterations: int = 1000
    target_gap: float = 0.0
    stall_window: Optional[int] = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.target_gap < 0:
            raise ConfigurationError("target_gap must be nonnegative")
        if self.stall_window is not None and self.stall_window < 1:
            raise ConfigurationError("stall_window must be >= 1")


@dataclass
class IterationRecord:
    k: int
    x: Optional[np.ndarray]
    f_value: float
    stepsize_used: float
    subgradient_evals: int
    dist_to_known_solution: Optional[float] = None
    active_index: Optional[int] = None


@dataclass
class RunResult:
    trajectory: List[IterationRecord]
    best_value: float
    best_point: np.ndarray
    status: Status
    seed: Optional[int] = None
    wall_time: float = 0.0
    algorithm: str = ""

    @property
    def iterations(self) -> int:
        """Number of steps taken (records minus the starting point)."""
        return len(self.trajectory) - 1

    @property
    def subgradient_evals(self) -> int:
        return self.trajectory[-1].subgradient_evals

    @property
    def final_point(self) -> Optional[np.ndarray]:
        return self.trajectory[-1].x

    def f_values(self) -> np.ndarray:
        return np.array([r.f_value for r in self.trajectory])

    def points(self) -> np.ndarray:
        return np.array([r.x for r in self.trajectory])


def _unit_direction(comp: ComponentFunction, i: int, z: np.ndarray) -> np.ndarray:
    g = comp.direction(z)
    if g.shape != z.shape:
        raise ContractViolationError(f"component {i} oracle returned shape {g.shape}, expected {z.shape}", index=i)
    norm = float(np.linalg.norm(g))
    if not abs(norm - 1.0) <= UNIT_TOL:
        raise ContractViolationError(f"component {i} oracle returned a vector of norm {norm!r}, expected 1", index=i)
    return g


def _ensure_feasible(problem: SumProblem, x) -> np.ndarray:
    x = as_point(x, problem.dim)
    if problem.projector.contains(x):
        return x.copy()
    return problem.projector.project(x)


def incsgm_cycle(
    problem: SumProblem,
    x_k,
    v_k: float,
    tol_opt: float = DEFAULT_TOL_OPT,
    order: Optional[Sequence[int]] = None,
):
    """One outer iteration of the skipping incremental method.

    Returns ``(x_next, evals)`` where ``evals`` counts the components that were
    not skipped.
    """
    if not v_k > 0:
        raise InvalidArgumentError(f"stepsize must be positive, got {v_k}")
    z = _ensure_feasible(problem, x_k)
    proj = problem.projector
    evals = 0
    for i in range(problem.m) if order is None else order:
        comp = problem.components[i]
        if comp(z) <= comp.optimal_value + tol_opt:
            continue
        try:
            g = _unit_direction(comp, i, z)
        except DegenerateDirectionError:
            continue
        z = proj.project(z - v_k * g)
        evals += 1
    return z, evals


def canonical_selector(i: int, comp: ComponentFunction, z: np.ndarray, tol_opt: float = DEFAULT_TOL_OPT) -> np.ndarray:
    """Unit quasi-subgradient away from the optimum, the zero element of the cone at it."""
    if comp(z) <= comp.optimal_value + tol_opt:
        return np.zeros_like(z)
    try:
        return _unit_direction(comp, i, z)
    except DegenerateDirectionError:
        return np.zeros_like(z)


def spot_check_selection(
    comp: ComponentFunction, i: int, z: np.ndarray, g: np.ndarray, samples: int = 8, rng=None
) -> None:
    """Sample points with a lower value and verify ``<g, y - z> <= 0`` on each.

    Raises :class:`ContractViolationError` on the first counterexample.
    """
    if samples <= 0:
        return
    rng = np.random.default_rng(0) if rng is None else rng
    fz = comp(z)
    gnorm = float(np.linalg.norm(g))
    dirs = rng.standard_normal((samples, z.size))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if gnorm > 0:
        dirs = np.vstack([dirs, g / gnorm])
    for radius in (1e-3, 1e-1, 1.0, 10.0):
        for d in dirs:
            y = z + radius * d
            if comp(y) < fz and float(np.dot(g, y - z)) > CONE_TOL:
                raise ContractViolationError(
                    f"selected vector for component {i} is not in the quasi-subdifferential at {z}", index=i
                )


def classical_incremental_cycle(
    problem: SumProblem,
    x_k,
    v_k: float,
    selector: Optional[Selector] = None,
    spot_check: int = 8,
) -> np.ndarray:
    """Cycle through every component unconditionally, stepping along ``selector``'s choice."""
    if not v_k > 0:
        raise InvalidArgumentError(f"stepsize must be positive, got {v_k}")
    selector = canonical_selector if selector is None else selector
    z = _ensure_feasible(problem, x_k)
    rng = np.random.default_rng(0)
    for i, comp in enumerate(problem.components):
        g = np.atleast_1d(np.asarray(selector(i, comp, z), dtype=float))
        if g.shape != z.shape:
            raise ContractViolationError(f"selector returned shape {g.shape} for component {i}", index=i)
        spot_check_selection(comp, i, z, g, samples=spot_check, rng=rng)
        z = problem.projector.project(z - v_k * g)
    return z


def randsgm_step(problem: SumProblem, x_k, v_k: float, tol_opt: float, rng: np.random.Generator):
    """One randomized step.  Returns ``(x_next, omega)``; ``omega`` is None when every component is optimal."""
    x = as_point(x_k, problem.dim)
    active = [
        i
        for i, comp in enumerate(problem.components)
        if not is_at_component_optimum(comp, x, tol_opt)
    ]
    return _randsgm_step_on(problem, x, v_k, active, rng)


def _randsgm_step_on(problem, x, v_k, active, rng):
    if not active:
        return x.copy(), None
    omega = int(active[int(rng.integers(len(active)))])
    try:
        g = _unit_direction(problem.components[omega], omega, x)
    except DegenerateDirectionError:
        return x.copy(), omega
    return problem.projector.project(x - v_k * g), omega


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


class _Trace:
    """Run bookkeeping: trajectory, best value, stopping tests."""

    def __init__(self, problem: SumProblem, stop: StopCriteria, record_points: bool, tol_opt: float):
        self.problem = problem
        self.tol_opt = tol_opt
        self.stop = stop
        self.record_points = record_points
        self.trajectory: List[IterationRecord] = []
        self.best_value = math.inf
        self.best_point = None
        self.best_k = 0
        self.evals = 0
        self.started = time.perf_counter()

    def observe(self, k, x, f):
        if f < self.best_value:
            self.best_value, self.best_point, self.best_k = f, x.copy(), k

    def target_reached(self, f, values) -> bool:
        opt = self.problem.optimal_value
        if opt is not None and f - opt <= self.stop.target_gap:
            return True
        return all(v <= c.optimal_value + self.tol_opt for v, c in zip(values, self.problem.components))

    def stalled(self, k) -> bool:
        w = self.stop.stall_window
        return w is not None and k - self.best_k >= w

    def record(self, k, x, f, v, active=None):
        sol = self.problem.known_solution
        dist = float(np.linalg.norm(x - sol)) if sol is not None else None
        self.trajectory.append(
            IterationRecord(
                k=k,
                x=x.copy() if self.record_points else None,
                f_value=f,
                stepsize_used=v,
                subgradient_evals=self.evals,
                dist_to_known_solution=dist,
                active_index=active,
            )
        )

    def finish(self, status, seed=None, algorithm="") -> RunResult:
        return RunResult(
            trajectory=self.trajectory,
            best_value=self.best_value,
            best_point=self.best_point,
            status=status,
            seed=seed,
            wall_time=time.perf_counter() - self.started,
            algorithm=algorithm,
        )


def _prepare_rule(problem: SumProblem, rule: StepsizeRule) -> StepsizeRule:
    if is_dynamic(rule):
        return rule.resolved(problem.optimal_value)
    return rule


def _cycle_order(reorder: Reorder, k: int, m: int, rng) -> Optional[np.ndarray]:
    if reorder == Reorder.FIXED:
        return None
    if reorder == Reorder.SHIFT:
        return np.roll(np.arange(m), -(k % m))
    return rng.permutation(m)


def _check_stop(trace: _Trace, k: int, x, f, values, rule, meta):
    """Return ``(status, v_k)``; status is None when the run continues."""
    if trace.target_reached(f, values):
        return Status.TARGET_REACHED, 0.0
    if k >= trace.stop.max_iterations:
        return Status.MAX_ITERATIONS, 0.0
    if trace.stalled(k):
        return Status.STALLED, 0.0
    v = next_stepsize(rule, k, f, meta) if rule is not None else None
    if v is not None and v <= 0.0:
        return Status.TARGET_REACHED, 0.0
    return None, v


def incsgm_run(
    problem: SumProblem,
    x0,
    rule: StepsizeRule,
    stop: StopCriteria = StopCriteria(),
    tol_opt: float = DEFAULT_TOL_OPT,
    reorder="fixed",
    rng_seed: Optional[int] = None,
    record_points: bool = True,
) -> RunResult:
    """Iterate :func:`incsgm_cycle` until ``stop`` fires.

    ``reorder`` permutes the component order at the start of every cycle:
    ``"fixed"`` keeps it, ``"shift"`` rotates it by ``k``, ``"shuffle"`` draws
    a fresh permutation from ``rng_seed``.
    """
    reorder = Reorder(reorder)
    rule = _prepare_rule(problem, rule)
    meta = problem.meta()
    rng = make_rng(0 if rng_seed is None else rng_seed) if reorder == Reorder.SHUFFLE else None
    trace = _Trace(problem, stop, record_points, tol_opt)
    x = _ensure_feasible(problem, x0)
    k = 0
    while True:
        values = component_values(problem, x)
        f = float(sum(values))
        trace.observe(k, x, f)
        status, v = _check_stop(trace, k, x, f, values, rule, meta)
        if status is not None:
            trace.record(k, x, f, 0.0)
            break
        trace.record(k, x, f, v)
        x, evals = incsgm_cycle(problem, x, v, tol_opt, _cycle_order(reorder, k, problem.m, rng))
        trace.evals += evals
        k += 1
    return trace.finish(status, seed=rng_seed, algorithm="incsgm")


def classical_run(
    problem: SumProblem,
    x0,
    rule: StepsizeRule,
    stop: StopCriteria = StopCriteria(),
    selector: Optional[Selector] = None,
    spot_check: int = 0,
    record_points: bool = True,
) -> RunResult:
    """Repeat :func:`classical_incremental_cycle`; every cycle costs ``m`` evaluations."""
    rule = _prepare_rule(problem, rule)
    meta = problem.meta()
    trace = _Trace(problem, stop, record_points, DEFAULT_TOL_OPT)
    x = _ensure_feasible(problem, x0)
    k = 0
    while True:
        values = component_values(problem, x)
        f = float(sum(values))
        trace.observe(k, x, f)
        status, v = _check_stop(trace, k, x, f, values, rule, meta)
        if status is not None:
            trace.record(k, x, f, 0.0)
            break
        trace.record(k, x, f, v)
        x = classical_incremental_cycle(problem, x, v, selector, spot_check)
        trace.evals += problem.m
        k += 1
    return trace.finish(status, algorithm="classical")


def randsgm_run(
    problem: SumProblem,
    x0,
    rule: StepsizeRule,
    stop: StopCriteria = StopCriteria(),
    tol_opt: float = DEFAULT_TOL_OPT,
    rng_seed: int = 0,
    record_points: bool = True,
) -> RunResult:
    """Randomized incremental method; identical seeds give identical trajectories."""
    if rng_seed is None:
        raise ConfigurationError("randsgm_run requires an explicit rng_seed")
    rule = _prepare_rule(problem, rule)
    meta = problem.meta()
    rng = make_rng(rng_seed)
    trace = _Trace(problem, stop, record_points, tol_opt)
    x = _ensure_feasible(problem, x0)
    k = 0
    while True:
        values = component_values(problem, x)
        f = float(sum(values))
        trace.observe(k, x, f)
        status, v = _check_stop(trace, k, x, f, values, rule, meta)
        if status is not None:
            trace.record(k, x, f, 0.0)
            break
        active = [i for i, c in enumerate(problem.components) if values[i] > c.optimal_value + tol_opt]
        x_next, omega = _randsgm_step_on(problem, x, v, active, rng)
        trace.evals += 1 if omega is not None else 0
        trace.record(k, x, f, v, active=omega)
        x = x_next
        k += 1
    return trace.finish(status, seed=rng_seed, algorithm="randsgm")


def sgpm_run(
    problem: SumProblem,
    x0,
    gamma: Gamma = 1.0,
    stop: StopCriteria = StopCriteria(),
    tol_opt: float = DEFAULT_TOL_OPT,
    record_points: bool = True,
) -> RunResult:
    """Cyclic subgradient projection for feasibility problems.

    Iteration ``k`` looks only at component ``i = k mod m``.  When it is
    violated the step is ``gamma_k * (f_i(x) / L_i)^(1/p)`` along the unit
    quasi-subgradient; otherwise the iterate is kept.
    """
    for i, comp in enumerate(problem.components):
        if not comp.feasibility or comp.optimal_value != 0.0:
            raise ConfigurationError(f"sgpm needs feasibility components max(h, 0); component {i} is not")
    trace = _Trace(problem, stop, record_points, tol_opt)
    x = _ensure_feasible(problem, x0)
    m = problem.m
    k = 0
    while True:
        values = component_values(problem, x)
        f = float(sum(values))
        trace.observe(k, x, f)
        status, _ = _check_stop(trace, k, x, f, values, None, None)
        if status is not None:
            trace.record(k, x, f, 0.0)
            break
        i = k % m
        comp = problem.components[i]
        v = 0.0
        if values[i] > tol_opt:
            try:
                g = _unit_direction(comp, i, x)
            except DegenerateDirectionError:
                g = None
            if g is not None:
                v = _gamma_at(gamma, k) * (values[i] / comp.hoelder.L) ** (1.0 / comp.hoelder.p)
                trace.evals += 1
                trace.record(k, x, f, v, active=i)
                x = problem.projector.project(x - v * g)
                k += 1
                continue
        trace.record(k, x, f, v, active=i)
        k += 1
    return trace.finish(status, algorithm="sgpm")


def basic_inequality_rhs(x_k, v_k: float, meta: OptimumMeta, f_xk: float, f_star: float, x_star) -> float:
    """Right-hand side ``||x_k - x*||^2 - 2 v C (f - f*)^(1/p) + m^2 v^2`` of the cycle contraction."""
    gap = max(f_xk - f_star, 0.0)
    d2 = float(np.sum((np.asarray(x_k) - np.asarray(x_star)) ** 2))
    c = c_pm(meta.p, meta.m, meta.L_max)
    return d2 - 2.0 * v_k * c * gap ** (1.0 / meta.p) + meta.m**2 * v_k**2


def check_basic_inequality(x_k, x_next, v_k: float, meta: OptimumMeta, f_xk: float, f_star: float, x_star) -> bool:
    """True iff one cycle contracted the squared distance to ``x_star`` as predicted."""
    d2 = float(np.sum((np.asarray(x_k) - np.asarray(x_star)) ** 2))
    lhs = float(np.sum((np.asarray(x_next) - np.asarray(x_star)) ** 2))
    return lhs <= basic_inequality_rhs(x_k, v_k, meta, f_xk, f_star, x_star) + BASIC_SLACK * (1.0 + d2)


def expected_basic_inequality_rhs(x_k, v_k: float, meta: OptimumMeta, f_xk: float, f_star: float, x_star) -> float:
    """Bound on ``E ||x_{k+1} - x*||^2`` for one randomized step from ``x_k``."""
    gap = max(f_xk - f_star, 0.0)
    d2 = float(np.sum((np.asarray(x_k) - np.asarray(x_star)) ** 2))
    r = r_pm(meta.p, meta.m, meta.L_max)
    return d2 - 2.0 * v_k * (r / meta.m) * gap ** (1.0 / meta.p) + v_k**2


def basic_inequality_violations(problem: SumProblem, result: RunResult, x_star=None) -> int:
    """Count consecutive trajectory pairs that break :func:`check_basic_inequality`."""
    x_star = problem.known_solution if x_star is None else x_star
    if x_star is None or problem.optimal_value is None:
        raise ConfigurationError("basic inequality needs a known solution and optimal value")
    meta = problem.meta()
    bad = 0
    for a, b in zip(result.trajectory[:-1], result.trajectory[1:]):
        if not check_basic_inequality(a.x, b.x, a.stepsize_used, meta, a.f_value, problem.optimal_value, x_star):
            bad += 1
    return bad
