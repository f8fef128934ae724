"""Euclidean projections onto the convex feasible sets used by the solvers.

Closed forms cover the whole space, boxes (the nonnegative orthant being a
special case) and single halfspaces.  Finite intersections of halfspaces with
an optional box are handled by Dykstra's cyclic projection scheme, followed by
an active-set polish that recovers the exact projection once Dykstra has
identified the binding constraints.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleSetError, InvalidArgumentError, ProjectionWarning

DEFAULT_TOL = 1e-10
DEFAULT_MAX_SWEEPS = 10_000
INFEASIBLE_VIOLATION = 1e-3
INFEASIBLE_WINDOW = 100
POLISH_EVERY = 25


@dataclass(frozen=True)
class Halfspace:
    """The closed halfspace ``{x : <a, x> >= b}``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float)).copy()
        if a.ndim != 1 or not np.all(np.isfinite(a)):
            raise InvalidArgumentError("halfspace normal must be a finite vector")
        if not np.linalg.norm(a) > 0:
            raise InvalidArgumentError("halfspace normal must be nonzero")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @classmethod
    def at_most(cls, a, b) -> "Halfspace":
        """``{x : <a, x> <= b}`` rewritten in the ``>=`` convention."""
        return cls(-np.asarray(a, dtype=float), -float(b))

    def slack(self, x) -> float:
        return float(np.dot(self.a, x) - self.b)


def project_nonneg(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def project_box(x, lower=-np.inf, upper=np.inf) -> np.ndarray:
    return np.clip(np.asarray(x, dtype=float), lower, upper)


def project_halfspace(x, h: Halfspace) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    gap = h.b - float(np.dot(h.a, x))
    if gap <= 0:
        return x.copy()
    return x + (gap / float(np.dot(h.a, h.a))) * h.a


class Projector:
    """Base class; subclasses implement ``project`` and ``violation``."""

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def violation(self, x) -> float:
        """Largest constraint violation at ``x`` (0 inside the set)."""
        raise NotImplementedError

    def contains(self, x, tol: float = DEFAULT_TOL) -> bool:
        return self.violation(x) <= tol

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))

    def __call__(self, x) -> np.ndarray:
        return self.project(x)


class WholeSpace(Projector):
    def project(self, x):
        return np.array(x, dtype=float)

    def violation(self, x):
        return 0.0

    def __repr__(self):
        return "WholeSpace()"


@dataclass(frozen=True, eq=False)
class Box(Projector):
    """``{x : lower <= x <= upper}``; bounds may be scalars or arrays, and infinite."""

    lower: object = -np.inf
    upper: object = np.inf

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if np.any(lo > hi):
            raise InvalidArgumentError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def project(self, x):
        return project_box(x, self.lower, self.upper)

    def violation(self, x):
        x = np.asarray(x, dtype=float)
        v = np.maximum(self.lower - x, x - self.upper)
        return float(max(0.0, np.max(v))) if v.size else 0.0


class NonnegOrthant(Box):
    """``{x : x >= floor}`` with ``floor = 0`` giving the nonnegative orthant."""

    def __init__(self, floor: float = 0.0):
        super().__init__(lower=floor, upper=np.inf)

    @property
    def floor(self) -> float:
        return float(self.lower)

    def __repr__(self):
        return f"NonnegOrthant(floor={self.floor!r})"


@dataclass(frozen=True, eq=False)
class SingleHalfspace(Projector):
    halfspace: Halfspace

    def project(self, x):
        return project_halfspace(x, self.halfspace)

    def violation(self, x):
        return max(0.0, -self.halfspace.slack(x))


@dataclass(frozen=True)
class DykstraResult:
    point: np.ndarray
    sweeps: int
    converged: bool
    violation: float
    polished: bool


def _stack(halfspaces: Sequence[Halfspace], dim: Optional[int]):
    if halfspaces:
        A = np.vstack([h.a for h in halfspaces])
        b = np.array([h.b for h in halfspaces])
    else:
        n = dim if dim is not None else 0
        A = np.zeros((0, n))
        b = np.zeros(0)
    return A, b


def _box_violation(x, lower, upper) -> float:
    if lower is None:
        return 0.0
    v = np.maximum(lower - x, x - upper)
    return float(max(0.0, np.max(v))) if v.size else 0.0


def _polish(x0, z, A, b, t, lower, upper, clamped, tol):
    """Solve the equality-constrained projection on the active set found by Dykstra.

    Returns the exact projection when the KKT sign conditions verify,
    otherwise ``None``.
    """
    n = x0.shape[0]
    active = np.flatnonzero(t > 0)
    fixed = np.flatnonzero(clamped)  # -1 clamped at lower, +1 at upper
    free = np.setdiff1d(np.arange(n), fixed)
    y = x0.copy()
    if fixed.size:
        at_lower = clamped[fixed] < 0
        y[fixed] = np.where(at_lower, np.broadcast_to(lower, (n,))[fixed], np.broadcast_to(upper, (n,))[fixed])
    lam = np.zeros(0)
    if active.size:
        M = A[np.ix_(active, free)]
        rhs = b[active] - A[np.ix_(active, fixed)] @ y[fixed] - M @ x0[free]
        delta, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        y[free] = x0[free] + delta
        lam, *_ = np.linalg.lstsq(M.T, delta, rcond=None)
        if not np.allclose(M.T @ lam, delta, rtol=1e-9, atol=1e-12):
            return None
        scale = 1e-9 * max(1.0, float(np.max(np.abs(lam)))) if lam.size else 0.0
        if np.any(lam < -scale):
            return None
    if fixed.size:
        mu = y[fixed] - x0[fixed]
        if active.size:
            mu = mu - (A[np.ix_(active, fixed)].T @ lam)
        eps = 1e-9 * max(1.0, float(np.max(np.abs(mu))))
        if np.any(mu[at_lower] < -eps) or np.any(mu[~at_lower] > eps):
            return None
    if A.shape[0] and float(np.max(b - A @ y, initial=0.0)) > tol:
        return None
    if _box_violation(y, lower, upper) > tol:
        return None
    return y


def dykstra(
    x,
    A: np.ndarray,
    b: np.ndarray,
    lower=None,
    upper=None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    gram: Optional[np.ndarray] = None,
) -> DykstraResult:
    """Dykstra's cyclic projection onto ``{A x >= b} ∩ box``.

    The box (if any) is one piece; each row of ``A`` is another.  Halfspace
    corrections are stored as scalars because they are always multiples of
    the row normal.  Pieces with zero correction that are already satisfied
    are skipped, which keeps a sweep cheap when few constraints bind.

    Convergence needs the iterate, the corrections and the violation all
    below ``tol``; every ``POLISH_EVERY`` sweeps the current active set is
    tried in an exact KKT solve, which usually ends the run early.
    """
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    x0 = np.asarray(x, dtype=float)
    n = x0.shape[0]
    s = A.shape[0]
    has_box = lower is not None
    if has_box:
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
    norms2 = np.einsum("ij,ij->i", A, A)
    if gram is None:
        gram = A @ A.T
    xk = x0.copy()
    t = np.zeros(s)
    y_box = np.zeros(n)
    best_point, best_viol = xk.copy(), np.inf
    history = []

    def violation_of(point, r):
        v = float(max(0.0, np.max(-r))) if s else 0.0
        if has_box:
            v = max(v, _box_violation(point, lower, upper))
        return v

    row_norms = np.sqrt(norms2)
    for sweep in range(1, max_sweeps + 1):
        x_prev, t_prev, y_prev = xk.copy(), t.copy(), y_box.copy()
        if has_box:
            u = xk + y_box
            xk = np.clip(u, lower, upper)
            y_box = u - xk
        r = A @ xk - b
        p = 0
        while p < s:
            need = np.flatnonzero((t[p:] > 0) | (r[p:] < 0))
            if need.size == 0:
                break
            p += int(need[0])
            slack_u = r[p] - t[p] * norms2[p]
            t_new = max(-slack_u, 0.0) / norms2[p]
            delta = t_new - t[p]
            if delta != 0.0:
                xk += delta * A[p]
                r += delta * gram[:, p]
            t[p] = t_new
            p += 1
        viol = violation_of(xk, A @ xk - b)
        history.append(viol)
        if viol < best_viol:
            best_point, best_viol = xk.copy(), viol
        # x can sit still for many sweeps while the corrections drift, so
        # both must settle before the iterate counts as converged
        change = float(np.linalg.norm(xk - x_prev))
        drift = float(np.max(np.abs(t - t_prev) * row_norms, initial=0.0))
        drift = max(drift, float(np.linalg.norm(y_box - y_prev)))
        done = change < tol and drift < tol and viol <= tol
        if done or sweep % POLISH_EVERY == 0:
            clamped = np.sign(y_box) if has_box else np.zeros(n)
            y = _polish(x0, xk, A, b, t, lower, upper, clamped, tol)
            if y is not None:
                return DykstraResult(y, sweep, True, violation_of(y, A @ y - b), True)
        if done:
            return DykstraResult(xk, sweep, True, viol, False)

    if (
        best_viol > INFEASIBLE_VIOLATION
        and len(history) > INFEASIBLE_WINDOW
        and history[-1] >= history[-1 - INFEASIBLE_WINDOW] - 1e-12
    ):
        raise InfeasibleSetError(
            f"violation {history[-1]:.3g} did not decrease over the last {INFEASIBLE_WINDOW} sweeps"
        )
    return DykstraResult(best_point, max_sweeps, False, best_viol, False)


def _split_pieces(pieces, dim):
    halfspaces = []
    lower = upper = None
    for piece in pieces:
        if isinstance(piece, Halfspace):
            halfspaces.append(piece)
        elif isinstance(piece, SingleHalfspace):
            halfspaces.append(piece.halfspace)
        elif isinstance(piece, Box):
            lo = np.broadcast_to(piece.lower, (dim,))
            hi = np.broadcast_to(piece.upper, (dim,))
            lower = lo if lower is None else np.maximum(lower, lo)
            upper = hi if upper is None else np.minimum(upper, hi)
        elif isinstance(piece, WholeSpace):
            continue
        else:
            raise InvalidArgumentError(f"no closed-form projector for piece {piece!r}")
    if lower is not None and np.any(lower > upper):
        raise InfeasibleSetError("box pieces have empty intersection")
    return halfspaces, lower, upper


def project_polyhedron(x, pieces, tol: float = DEFAULT_TOL, max_sweeps: int = DEFAULT_MAX_SWEEPS) -> np.ndarray:
    """Project onto the intersection of closed-form pieces (halfspaces, boxes, orthants).

    Warns with :class:`ProjectionWarning` and returns the least-violating
    iterate when ``max_sweeps`` is exhausted.
    """
    x = np.asarray(x, dtype=float)
    halfspaces, lower, upper = _split_pieces(pieces, x.shape[0])
    A, b = _stack(halfspaces, x.shape[0])
    return _project(x, A, b, lower, upper, tol, max_sweeps, None)


def _project(x, A, b, lower, upper, tol, max_sweeps, gram):
    has_box = lower is not None
    z = np.clip(x, lower, upper) if has_box else x.copy()
    if A.shape[0] == 0 or np.all(A @ z >= b):
        return z
    if not has_box and A.shape[0] == 1:
        return z + ((b[0] - A[0] @ z) / float(A[0] @ A[0])) * A[0]
    res = dykstra(x, A, b, lower, upper, tol=tol, max_sweeps=max_sweeps, gram=gram)
    if not res.converged:
        warnings.warn(
            f"Dykstra projection hit max_sweeps={max_sweeps} with violation {res.violation:.3g}",
            ProjectionWarning,
            stacklevel=3,
        )
    return res.point


@dataclass(frozen=True, eq=False)
class Polyhedron(Projector):
    """``{x : <a_t, x> >= b_t for all t}``, optionally intersected with ``x >= floor``.

    Parameters
    ----------
    halfspaces : sequence of Halfspace
    nonneg : bool
        Add the orthant piece ``x >= floor``.
    floor : float
        Lower bound used when ``nonneg`` is set.  Cobb-Douglas problems use a
        small positive floor to stay inside the oracle domain.
    tol, max_sweeps
        Dykstra stopping parameters.
    """

    halfspaces: tuple
    nonneg: bool = False
    floor: float = 0.0
    tol: float = DEFAULT_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    dim: Optional[int] = None
    _A: np.ndarray = field(init=False, repr=False)
    _b: np.ndarray = field(init=False, repr=False)
    _gram: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        object.__setattr__(self, "halfspaces", hs)
        dims = {h.a.shape[0] for h in hs}
        if self.dim is not None:
            dims.add(self.dim)
        if len(dims) > 1:
            raise InvalidArgumentError(f"halfspace normals have inconsistent dimensions {sorted(dims)}")
        if self.tol <= 0 or self.max_sweeps < 1:
            raise InvalidArgumentError("tol must be positive and max_sweeps >= 1")
        dim = dims.pop() if dims else None
        object.__setattr__(self, "dim", dim)
        A, b = _stack(hs, dim)
        object.__setattr__(self, "_A", A)
        object.__setattr__(self, "_b", b)
        object.__setattr__(self, "_gram", A @ A.T)

    @classmethod
    def from_matrix(cls, A, b, **kwargs) -> "Polyhedron":
        """Build ``{x : A x >= b}`` from a dense matrix."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        kwargs.setdefault("dim", A.shape[1])
        return cls(tuple(Halfspace(row, bt) for row, bt in zip(A, b)), **kwargs)

    @property
    def A(self) -> np.ndarray:
        return self._A

    @property
    def b(self) -> np.ndarray:
        return self._b

    def _bounds(self):
        if self.nonneg:
            return self.floor, np.inf
        return None, None

    def project(self, x):
        x = np.asarray(x, dtype=float)
        lower, upper = self._bounds()
        return _project(x, self._A, self._b, lower, upper, self.tol, self.max_sweeps, self._gram)

    def project_with_info(self, x) -> DykstraResult:
        x = np.asarray(x, dtype=float)
        lower, upper = self._bounds()
        return dykstra(x, self._A, self._b, lower, upper, self.tol, self.max_sweeps, self._gram)

    def violation(self, x):
        x = np.asarray(x, dtype=float)
        v = float(max(0.0, np.max(self._b - self._A @ x))) if self._b.size else 0.0
        if self.nonneg:
            v = max(v, float(max(0.0, np.max(self.floor - x))))
        return v
