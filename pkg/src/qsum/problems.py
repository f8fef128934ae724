"""Problem generators: analytic counterexamples, feasibility systems, Cobb-Douglas ratios.

Feasibility systems ``h_i(x) <= 0`` become sums of ``f_i = max(h_i, 0)``,
each with optimal value 0.  The multiple Cobb-Douglas productions efficiency
(MCDPE) family maximizes a sum of ratios ``p_i(x) / c_i(x)`` with

    p_i(x) = a_i0 * prod_j x_j ** a_ij,     c_i(x) = sum_j c_ij x_j + c_i0,

over ``{x >= 0, B x >= p_rhs}``.  It is fed to the minimization solvers either
directly (components ``-R_i``) or through the feasibility reformulation with
targets ``h_i = target_i - R_i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateDirectionError, DomainError, InvalidArgumentError
from .problem import ComponentFunction, HoelderParams, SumProblem, as_point
from .projections import Box, Halfspace, Polyhedron, Projector, WholeSpace

DOMAIN_FLOOR = 1e-8
TARGET_SHORTFALL = 1e-3


def _sign_direction(s: float) -> np.ndarray:
    return np.array([1.0 if s >= 0 else -1.0])


def make_example3() -> SumProblem:
    """``f_1 = max(x, 0)``, ``f_2 = max(-x, 0)`` on the real line.

    Their sum is ``|x|`` with the unique minimizer 0.  The oracles return +1
    for ``f_1`` and -1 for ``f_2`` everywhere, which is a valid (and at the
    optimum, arbitrary) element of each quasi-subdifferential.
    """
    f1 = ComponentFunction(
        value=lambda x: max(float(x[0]), 0.0),
        unit_quasi_subgradient=lambda x: np.array([1.0]),
        hoelder=HoelderParams(1.0, 1.0),
        feasibility=True,
        name="max(x,0)",
    )
    f2 = ComponentFunction(
        value=lambda x: max(-float(x[0]), 0.0),
        unit_quasi_subgradient=lambda x: np.array([-1.0]),
        hoelder=HoelderParams(1.0, 1.0),
        feasibility=True,
        name="max(-x,0)",
    )
    return SumProblem(
        components=(f1, f2),
        projector=WholeSpace(),
        dim=1,
        optimal_value=0.0,
        known_solution=np.array([0.0]),
        assumption1_holds=True,
        solution_set=Box(0.0, 0.0),
        name="example3",
    )


def example3_adversarial_selector(i: int, comp: ComponentFunction, z: np.ndarray) -> np.ndarray:
    """Pick +1 for ``f_1`` and -1 for ``f_2`` even where ``f_2`` is already minimal.

    For ``x >= 0`` the quasi-subdifferential of ``f_2`` is the whole line, so
    -1 is admissible, and it undoes the ``f_1`` step exactly.
    """
    return np.array([1.0]) if i == 0 else np.array([-1.0])


def make_example4() -> SumProblem:
    """``f_1 = max(x + 2, 0)``, ``f_2 = max(-2x + 2, 0)``: no common minimizer.

    The component minimizers ``(-inf, -2]`` and ``[1, inf)`` are disjoint; the
    sum has optimal value 3 at ``x = 1``.
    """
    f1 = ComponentFunction(
        value=lambda x: max(float(x[0]) + 2.0, 0.0),
        unit_quasi_subgradient=lambda x: np.array([1.0]),
        hoelder=HoelderParams(1.0, 1.0),
        feasibility=True,
        name="max(x+2,0)",
    )
    f2 = ComponentFunction(
        value=lambda x: max(-2.0 * float(x[0]) + 2.0, 0.0),
        unit_quasi_subgradient=lambda x: np.array([-1.0]),
        hoelder=HoelderParams(1.0, 2.0),
        feasibility=True,
        name="max(-2x+2,0)",
    )
    return SumProblem(
        components=(f1, f2),
        projector=WholeSpace(),
        dim=1,
        optimal_value=3.0,
        known_solution=np.array([1.0]),
        assumption1_holds=False,
        solution_set=Box(1.0, 1.0),
        name="example4",
    )


@dataclass(frozen=True)
class Constraint:
    """A quasi-convex constraint ``h(x) <= 0`` with a unit quasi-subgradient oracle for ``h``."""

    value: Callable[[np.ndarray], float]
    direction: Callable[[np.ndarray], np.ndarray]
    hoelder: HoelderParams = HoelderParams()
    halfspace: Optional[Halfspace] = None
    name: str = ""


def linear_constraint(a, b) -> Constraint:
    """``<a, x> <= b``; Lipschitz with modulus ``||a||``."""
    a = np.atleast_1d(np.asarray(a, dtype=float)).copy()
    norm = float(np.linalg.norm(a))
    if norm == 0:
        raise InvalidArgumentError("constraint normal must be nonzero")
    unit = a / norm
    b = float(b)
    return Constraint(
        value=lambda x: float(np.dot(a, x)) - b,
        direction=lambda x: unit,
        hoelder=HoelderParams(1.0, norm),
        halfspace=Halfspace.at_most(a, b),
        name=f"<a,x> <= {b:g}",
    )


def ball_constraint(center, radius: float) -> Constraint:
    """``||x - center|| <= radius``; the direction at the center is fixed to ``e_1``."""
    center = np.atleast_1d(np.asarray(center, dtype=float)).copy()
    radius = float(radius)

    def direction(x):
        d = np.asarray(x, dtype=float) - center
        nrm = float(np.linalg.norm(d))
        if nrm == 0:
            e = np.zeros_like(d)
            e[0] = 1.0
            return e
        return d / nrm

    return Constraint(
        value=lambda x: float(np.linalg.norm(np.asarray(x, dtype=float) - center)) - radius,
        direction=direction,
        hoelder=HoelderParams(1.0, 1.0),
        name=f"ball(r={radius:g})",
    )


def feasibility_component(con: Constraint) -> ComponentFunction:
    h = con.value
    return ComponentFunction(
        value=lambda x: max(h(x), 0.0),
        unit_quasi_subgradient=con.direction,
        optimal_value=0.0,
        hoelder=con.hoelder,
        feasibility=True,
        name=f"max({con.name}, 0)" if con.name else "",
    )


def make_feasibility_problem(
    constraints: Sequence[Constraint],
    projector: Projector,
    dim: int,
    known_solution=None,
    name: str = "feasibility",
) -> SumProblem:
    """Sum of ``max(h_i, 0)`` over a consistent system (the caller vouches for consistency).

    When every constraint is linear the solution set is exposed as a
    polyhedral projector for distance diagnostics.
    """
    solution_set = None
    if all(c.halfspace is not None for c in constraints):
        pieces = [c.halfspace for c in constraints]
        if isinstance(projector, Box) and not isinstance(projector, Polyhedron):
            lo = np.broadcast_to(projector.lower, (dim,))
            hi = np.broadcast_to(projector.upper, (dim,))
            for j in range(dim):
                e = np.zeros(dim)
                e[j] = 1.0
                if np.isfinite(lo[j]):
                    pieces.append(Halfspace(e, lo[j]))
                if np.isfinite(hi[j]):
                    pieces.append(Halfspace(-e, -hi[j]))
            solution_set = Polyhedron(tuple(pieces), dim=dim)
        elif isinstance(projector, WholeSpace):
            solution_set = Polyhedron(tuple(pieces), dim=dim)
    return SumProblem(
        components=tuple(feasibility_component(c) for c in constraints),
        projector=projector,
        dim=dim,
        optimal_value=0.0,
        known_solution=known_solution,
        assumption1_holds=True,
        solution_set=solution_set,
        name=name,
    )


def random_feasibility_problem(
    n: int = 10,
    m: int = 5,
    seed: int = 0,
    margin=(0.1, 1.0),
    box: float = 10.0,
    center_box: float = 5.0,
) -> SumProblem:
    """Random consistent system of ``m`` halfspaces ``<a_i, x> <= b_i`` in ``[-box, box]^n``.

    A center ``x*`` is drawn from ``[-center_box, center_box]^n``; unit normals
    are drawn uniformly on the sphere and ``b_i = <a_i, x*> + margin_i``, so the
    ball of radius ``min(margin)`` around ``x*`` lies in the solution set.
    """
    rng = np.random.default_rng(seed)
    x_star = rng.uniform(-center_box, center_box, n)
    normals = rng.standard_normal((m, n))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    lo, hi = margin
    margins = rng.uniform(lo, hi, m) if hi > lo else np.full(m, float(lo))
    cons = [linear_constraint(a, float(a @ x_star) + mg) for a, mg in zip(normals, margins)]
    return make_feasibility_problem(cons, Box(-box, box), n, known_solution=x_star, name=f"feasibility(n={n},m={m})")


@dataclass(frozen=True)
class MCDPEInstance:
    """Data of one multiple Cobb-Douglas productions efficiency problem.

    ``a[i, 0]`` is the profit scale and ``a[i, 1:]`` the exponents (rows sum
    to 1); ``c[i, 0]`` is the fixed cost and ``c[i, 1:]`` the linear costs.
    The feasible set is ``{x >= 0, B x >= p_rhs}``.
    """

    a: np.ndarray
    c: np.ndarray
    B: np.ndarray
    p_rhs: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("a", "c", "B", "p_rhs"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.a.shape != self.c.shape or self.a.ndim != 2:
            raise InvalidArgumentError("a and c must both be m x (n+1)")
        if self.B.ndim != 2 or self.B.shape[1] != self.n or self.p_rhs.shape != (self.B.shape[0],):
            raise InvalidArgumentError("B must be s x n and p_rhs length s")
        if np.any(self.a < 0) or np.any(self.c < 0) or np.any(self.B < 0) or np.any(self.p_rhs < 0):
            raise InvalidArgumentError("MCDPE data must be nonnegative")
        if not np.allclose(self.a[:, 1:].sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise InvalidArgumentError("exponent rows must sum to 1")

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1] - 1

    @property
    def s(self) -> int:
        return self.B.shape[0]

    def feasible_set(self, floor: float = DOMAIN_FLOOR, **kwargs) -> Polyhedron:
        return Polyhedron.from_matrix(self.B, self.p_rhs, nonneg=True, floor=floor, **kwargs)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "s": self.s,
            "a": self.a.tolist(),
            "c": self.c.tolist(),
            "B": self.B.tolist(),
            "p_rhs": self.p_rhs.tolist(),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "MCDPEInstance":
        inst = cls(a=data["a"], c=data["c"], B=data["B"], p_rhs=data["p_rhs"], seed=data.get("seed"))
        if (inst.m, inst.n, inst.s) != (data["m"], data["n"], data["s"]):
            raise InvalidArgumentError("declared dimensions do not match the arrays")
        return inst

    @classmethod
    def from_json(cls, text: str) -> "MCDPEInstance":
        return cls.from_dict(json.loads(text))


def generate_mcdpe(m: int, n: int, s: int, rng_seed: int) -> MCDPEInstance:
    """Random instance with ``a_i0 in [0, 10]``, ``a_ij, b_tj, c_ij in [0, 1]``, ``p_t in [0, n/2]``.

    Exponent rows are drawn uniformly and then normalized to sum to one.
    """
    if min(m, n, s) < 1:
        raise InvalidArgumentError("m, n, s must be positive")
    rng = np.random.Generator(np.random.Philox(int(rng_seed)))
    scale = rng.uniform(0.0, 10.0, m)
    expo = rng.uniform(0.0, 1.0, (m, n))
    sums = expo.sum(axis=1, keepdims=True)
    expo = np.where(sums > 0, expo / np.where(sums > 0, sums, 1.0), 1.0 / n)
    costs = rng.uniform(0.0, 1.0, (m, n + 1))
    B = rng.uniform(0.0, 1.0, (s, n))
    p_rhs = rng.uniform(0.0, n / 2.0, s)
    a = np.column_stack([scale, expo])
    return MCDPEInstance(a=a, c=costs, B=B, p_rhs=p_rhs, seed=int(rng_seed))


def _check_domain(x: np.ndarray) -> None:
    if np.any(x <= 0):
        raise DomainError("Cobb-Douglas ratios need x > 0 componentwise")


def mcdpe_ratio(inst: MCDPEInstance, i: int, x) -> float:
    x = as_point(x, inst.n)
    _check_domain(x)
    profit = inst.a[i, 0] * math.exp(float(inst.a[i, 1:] @ np.log(x)))
    cost = float(inst.c[i, 1:] @ x) + inst.c[i, 0]
    return profit / cost


def mcdpe_ratios(inst: MCDPEInstance, x) -> np.ndarray:
    """All ``m`` ratios at ``x``."""
    x = as_point(x, inst.n)
    _check_domain(x)
    profit = inst.a[:, 0] * np.exp(inst.a[:, 1:] @ np.log(x))
    cost = inst.c[:, 1:] @ x + inst.c[:, 0]
    return profit / cost


def total_ratio(inst: MCDPEInstance, x) -> float:
    """The efficiency ``sum_i R_i(x)`` being maximized."""
    return float(np.sum(mcdpe_ratios(inst, x)))


def ratio_quasi_subgradient(inst: MCDPEInstance, i: int, x) -> np.ndarray:
    """Unit normal ``-d / ||d||`` with ``d = grad p_i - R_i grad c_i``.

    ``d`` is a positive multiple of ``grad R_i``, so ``-d`` is an outward normal
    of the convex superlevel set ``{R_i > R_i(x)}``, i.e. a quasi-subgradient
    of ``-R_i`` (or of ``target - R_i``).
    """
    x = as_point(x, inst.n)
    _check_domain(x)
    profit = inst.a[i, 0] * math.exp(float(inst.a[i, 1:] @ np.log(x)))
    cost = float(inst.c[i, 1:] @ x) + inst.c[i, 0]
    ratio = profit / cost
    d = profit * inst.a[i, 1:] / x - ratio * inst.c[i, 1:]
    norm = float(np.linalg.norm(d))
    if not norm > 0 or not math.isfinite(norm):
        raise DegenerateDirectionError(f"ratio {i} is stationary at x")
    return -d / norm


def estimate_hoelder_constants(
    inst: MCDPEInstance,
    rng_seed: int = 0,
    samples: int = 200,
    box=(0.0, 2.0),
    step: float = 1e-3,
) -> np.ndarray:
    """Largest sampled finite-difference slope ``|R_i(y) - R_i(x)| / ||y - x||`` per ratio.

    Points are drawn uniformly in ``box^n`` and each is paired with a random
    neighbour at distance ``step``.
    """
    rng = np.random.Generator(np.random.Philox(int(rng_seed)))
    lo, hi = box
    L = np.zeros(inst.m)
    for _ in range(samples):
        x = rng.uniform(lo, hi, inst.n)
        d = rng.standard_normal(inst.n)
        y = np.maximum(x + step * d / np.linalg.norm(d), DOMAIN_FLOOR)
        dist = float(np.linalg.norm(y - x))
        L = np.maximum(L, np.abs(mcdpe_ratios(inst, y) - mcdpe_ratios(inst, x)) / dist)
    return np.maximum(L, 1e-12)


def _ratio_component(inst, i, optimal_value, hoelder, targeted):
    if targeted is None:
        value = lambda x: -mcdpe_ratio(inst, i, x)  # noqa: E731
        feas = False
    else:
        value = lambda x: max(targeted - mcdpe_ratio(inst, i, x), 0.0)  # noqa: E731
        feas = True
    return ComponentFunction(
        value=value,
        unit_quasi_subgradient=lambda x: ratio_quasi_subgradient(inst, i, x),
        optimal_value=optimal_value,
        hoelder=hoelder,
        feasibility=feas,
        name=f"R_{i}",
    )


def _check_L(L_estimates, m):
    L = np.asarray(L_estimates, dtype=float)
    if L.shape != (m,) or np.any(~(L > 0)):
        raise ConfigurationError("L_estimates must be m positive numbers")
    return L


def sor_to_sum_problem(
    inst: MCDPEInstance,
    targets,
    L_estimates,
    p_order: float = 1.0,
    assumption1_holds: Optional[bool] = None,
    projector: Optional[Projector] = None,
) -> SumProblem:
    """Feasibility reformulation: components ``max(target_i - R_i, 0)``.

    Targets above the attainable maxima make the common solution set empty;
    in that case (and whenever the caller cannot vouch otherwise) the problem
    is flagged as lacking a common minimizer and carries no optimal value.
    """
    targets = np.asarray(targets, dtype=float)
    L = _check_L(L_estimates, inst.m)
    if assumption1_holds is None:
        assumption1_holds = bool(np.all(targets <= 0))
    comps = tuple(
        _ratio_component(inst, i, 0.0, HoelderParams(p_order, float(L[i])), float(targets[i])) for i in range(inst.m)
    )
    return SumProblem(
        components=comps,
        projector=inst.feasible_set() if projector is None else projector,
        dim=inst.n,
        optimal_value=0.0 if assumption1_holds else None,
        assumption1_holds=assumption1_holds,
        name="mcdpe-feasibility",
    )


def sor_direct_problem(
    inst: MCDPEInstance,
    L_estimates,
    p_order: float = 1.0,
    targets=None,
    projector: Optional[Projector] = None,
) -> SumProblem:
    """Direct form: minimize ``sum_i -R_i``.

    Without ``targets`` no component is ever treated as optimal.  With them a
    component counts as optimal once ``R_i >= target_i``.
    """
    L = _check_L(L_estimates, inst.m)
    if targets is None:
        optima = np.full(inst.m, -np.inf)
    else:
        optima = -np.asarray(targets, dtype=float)
    comps = tuple(
        _ratio_component(inst, i, float(optima[i]), HoelderParams(p_order, float(L[i])), None) for i in range(inst.m)
    )
    return SumProblem(
        components=comps,
        projector=inst.feasible_set() if projector is None else projector,
        dim=inst.n,
        optimal_value=None,
        assumption1_holds=False,
        name="mcdpe-direct",
    )


def default_start(inst: MCDPEInstance, projector: Optional[Projector] = None) -> np.ndarray:
    """The all-ones vector projected onto the feasible set."""
    proj = inst.feasible_set() if projector is None else projector
    return proj.project(np.ones(inst.n))


def estimate_component_maximum(
    inst: MCDPEInstance,
    i: int,
    budget: int = 200,
    x0=None,
    projector: Optional[Projector] = None,
    v: float = 3.0,
) -> float:
    """Lower bound on ``max_X R_i`` from a single-component run of the incremental method.

    Runs ``budget`` iterations with the ``v / (1 + 0.1 k)`` schedule on
    ``-R_i`` and returns the best ratio seen.
    """
    from .solvers import StopCriteria, incsgm_run
    from .stepsize import Diminishing

    if budget < 1:
        raise InvalidArgumentError("budget must be >= 1")
    proj = inst.feasible_set() if projector is None else projector
    comp = _ratio_component(inst, i, -np.inf, HoelderParams(1.0, 1.0), None)
    single = SumProblem(components=(comp,), projector=proj, dim=inst.n, name=f"R_{i}")
    start = default_start(inst, proj) if x0 is None else proj.project(np.asarray(x0, dtype=float))
    result = incsgm_run(single, start, Diminishing(v=v, rate=0.1), StopCriteria(max_iterations=budget), record_points=False)
    return -result.best_value


def default_targets(inst: MCDPEInstance, budget: int = 200, shortfall: float = TARGET_SHORTFALL, **kwargs) -> np.ndarray:
    """``(1 - shortfall)`` times each component's estimated maximum."""
    return np.array(
        [(1.0 - shortfall) * estimate_component_maximum(inst, i, budget, **kwargs) for i in range(inst.m)]
    )
