"""Problem abstraction: quasi-convex components, their sum, and optimum metadata.

A :class:`SumProblem` is the only thing solvers consume.  It bundles an
ordered tuple of :class:`ComponentFunction` oracles, a projector onto the
feasible set, and whatever is known about the optimum.  Everything here is
immutable so one problem can be shared by concurrently running solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, NumericError

Oracle = Callable[[np.ndarray], float]
DirectionOracle = Callable[[np.ndarray], np.ndarray]

DEFAULT_TOL_OPT = 1e-9


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float array, checking ``dim`` if given."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise InvalidArgumentError(f"point must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidArgumentError(f"point has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("point has non-finite entries")
    return arr


@dataclass(frozen=True)
class HoelderParams:
    """Order ``p`` and modulus ``L`` of ``|h(y) - h(x)| <= L ||y - x||^p``."""

    p: float = 1.0
    L: float = 1.0

    def __post_init__(self):
        if not (self.p > 0 and self.L > 0):
            raise InvalidArgumentError(f"Hoelder parameters must be positive, got p={self.p}, L={self.L}")


@dataclass(frozen=True)
class ComponentFunction:
    """One quasi-convex summand ``f_i``.

    Parameters
    ----------
    value : callable
        ``x -> f_i(x)``.
    unit_quasi_subgradient : callable
        ``x -> g`` with ``||g|| = 1`` and ``<g, y - x> <= 0`` whenever
        ``f_i(y) < f_i(x)``.  Where the quasi-subdifferential is a whole cone
        the oracle commits to one fixed element.
    optimal_value : float
        ``min_X f_i``.  ``-inf`` means "unknown, never treat as attained".
    hoelder : HoelderParams
        Order and modulus of the Hoelder condition on the feasible set.
    feasibility : bool
        True when the component has the form ``max{h, 0}`` with optimal value 0.
    """

    value: Oracle
    unit_quasi_subgradient: DirectionOracle
    optimal_value: float = 0.0
    hoelder: HoelderParams = field(default_factory=HoelderParams)
    feasibility: bool = False
    name: str = ""

    def __call__(self, x) -> float:
        return float(self.value(x))

    def direction(self, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.unit_quasi_subgradient(x), dtype=float))


@dataclass(frozen=True)
class OptimumMeta:
    """Constants shared by the stepsize rules and the basic inequalities."""

    p: float
    L_max: float
    m: int

    def __post_init__(self):
        if not (self.p > 0 and self.L_max > 0 and self.m >= 1):
            raise InvalidArgumentError(f"invalid optimum metadata {self}")


@dataclass(frozen=True)
class SumProblem:
    """Minimize ``sum_i f_i(x)`` over the feasible set of ``projector``.

    ``solution_set`` is an optional projector onto the optimal set, used for
    membership tests and distance diagnostics; ``known_solution`` is one
    optimal point.
    """

    components: tuple
    projector: object
    dim: int
    optimal_value: Optional[float] = None
    known_solution: Optional[np.ndarray] = None
    assumption1_holds: bool = False
    solution_set: Optional[object] = None
    name: str = ""

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise InvalidArgumentError("a sum problem needs at least one component")
        object.__setattr__(self, "components", comps)
        if self.known_solution is not None:
            sol = as_point(self.known_solution, self.dim)
            sol.setflags(write=False)
            object.__setattr__(self, "known_solution", sol)
        if self.assumption1_holds and self.optimal_value is not None:
            total = math.fsum(c.optimal_value for c in comps)
            if abs(total - self.optimal_value) > 1e-9:
                raise InvalidArgumentError(
                    f"common minimizer declared but optimal_value={self.optimal_value} "
                    f"differs from the sum of component optima {total}"
                )

    @property
    def m(self) -> int:
        return len(self.components)

    def meta(self) -> OptimumMeta:
        orders = {c.hoelder.p for c in self.components}
        if len(orders) != 1:
            raise InvalidArgumentError(f"components have mixed Hoelder orders {sorted(orders)}")
        return OptimumMeta(p=orders.pop(), L_max=l_max(self), m=self.m)

    def __call__(self, x) -> float:
        return evaluate_sum(self, x)

    def with_components(self, components: Sequence[ComponentFunction]) -> "SumProblem":
        """Same feasible set and metadata, reordered or replaced components."""
        return SumProblem(
            components=tuple(components),
            projector=self.projector,
            dim=self.dim,
            optimal_value=self.optimal_value,
            known_solution=self.known_solution,
            assumption1_holds=self.assumption1_holds,
            solution_set=self.solution_set,
            name=self.name,
        )


def component_values(problem: SumProblem, x) -> np.ndarray:
    """Vector of ``f_i(x)`` in component order, rejecting NaN values."""
    values = np.empty(problem.m)
    for i, comp in enumerate(problem.components):
        fi = comp(x)
        if math.isnan(fi):
            raise NumericError(f"component {i} returned NaN", index=i)
        values[i] = fi
    return values


def evaluate_sum(problem: SumProblem, x) -> float:
    """``sum_i f_i(x)``, accumulated in component order."""
    x = as_point(x, problem.dim)
    total = 0.0
    for i, comp in enumerate(problem.components):
        fi = comp(x)
        if math.isnan(fi):
            raise NumericError(f"component {i} returned NaN", index=i)
        total += fi
    return total


def l_max(problem: SumProblem) -> float:
    comps = problem.components if isinstance(problem, SumProblem) else tuple(problem)
    if not comps:
        raise InvalidArgumentError("no components")
    return max(c.hoelder.L for c in comps)


def is_at_component_optimum(component: ComponentFunction, x, tol: float = DEFAULT_TOL_OPT) -> bool:
    """True iff ``f_i(x) <= f_i* + tol``; the floating-point stand-in for ``f_i(x) = f_i*``."""
    if tol < 0:
        raise InvalidArgumentError("tol must be nonnegative")
    return component(x) <= component.optimal_value + tol
