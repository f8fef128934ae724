"""Independent reference computations used by the tests.

Nothing here imports the solver or projection code; each oracle is a
brute-force or closed-form computation written separately from the library.
"""

import numpy as np


def _constraint_rows(A, b, lower, upper):
    """All constraints of ``{A z >= b, lower <= z <= upper}`` as unit-normal rows ``n . z >= c``."""
    A = np.zeros((0, 2)) if A is None else np.asarray(A, dtype=float).reshape(-1, 2)
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float).reshape(-1)
    rows, rhs = [], []
    for a_t, b_t in zip(A, b):
        nrm = np.linalg.norm(a_t)
        rows.append(a_t / nrm)
        rhs.append(b_t / nrm)
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1.0
        if lower is not None and np.isfinite(np.broadcast_to(lower, (2,))[j]):
            rows.append(e)
            rhs.append(float(np.broadcast_to(lower, (2,))[j]))
        if upper is not None and np.isfinite(np.broadcast_to(upper, (2,))[j]):
            rows.append(-e)
            rhs.append(-float(np.broadcast_to(upper, (2,))[j]))
    return np.array(rows).reshape(-1, 2), np.array(rhs)


def _line_search_grid(x, p0, u, N, c, scale, final_cell, points, shrink):
    """Closest point to ``x`` on the line ``p0 + t u`` inside ``N z >= c``, by zooming 1-D grid.

    Violation is measured along the line (how far ``t`` must move to satisfy
    each constraint), so a grid point is admitted when it lies within one
    cell of the feasible interval.  Returns ``None`` when the line misses the
    set.
    """
    slope = N @ u
    base = N @ p0 - c
    parallel = np.abs(slope) < 1e-14
    if np.any(parallel & (base < -1e-12)):
        return None
    slope, base = slope[~parallel], base[~parallel]
    t0 = float(u @ (x - p0))
    center, half = t0, 4.0 * scale
    grid = np.linspace(-1.0, 1.0, points)
    while True:
        cell = 2.0 * half / (points - 1)
        T = center + half * grid
        # constraint k holds iff base_k + slope_k t >= 0; distance in t to that ray
        viol = np.max(np.maximum(-(base[None, :] + T[:, None] * slope[None, :]) / np.abs(slope)[None, :], 0.0), axis=1) if len(slope) else np.zeros(len(T))
        ok = viol <= cell
        if not np.any(ok):
            return None
        Tk = T[ok]
        center = float(Tk[np.argmin((Tk - t0) ** 2)])
        if cell <= final_cell:
            # the winner may sit up to a cell outside; pull it back so the
            # relaxation cannot buy distance on very thin sets
            roots = -base / slope
            lo = np.max(roots[slope > 0], initial=-np.inf)
            hi = np.min(roots[slope < 0], initial=np.inf)
            return p0 + float(np.clip(center, lo, hi)) * u
        half /= shrink


def grid_projection_2d(x, A=None, b=None, lower=None, upper=None, final_cell=1e-13, points=41, shrink=8.0):
    """Nearest point of ``{A z >= b, lower <= z <= upper}`` to ``x`` by grid search.

    If ``x`` is feasible it is its own projection.  Otherwise the projection
    lies on the boundary, so every constraint line is scanned with a 1-D grid
    that zooms (the window narrows by ``shrink`` each level, keeping at
    least two cells either side of the previous winner) onto the closest nearly
    feasible point, and the best of those candidates wins.  Searching along
    lines keeps the accuracy at the final cell size; a plain 2-D grid would
    only locate a constrained minimizer to about the square root of its cell.
    """
    x = np.asarray(x, dtype=float)
    N, c = _constraint_rows(A, b, lower, upper)
    if not len(N) or np.all(N @ x >= c):
        return x.copy()
    scale = 1.0 + np.max(np.abs(x)) + np.max(np.abs(c))
    best, best_d = None, np.inf
    for n_row, c_row in zip(N, c):
        p0 = c_row * n_row
        u = np.array([-n_row[1], n_row[0]])
        z = _line_search_grid(x, p0, u, N, c, scale, final_cell * scale, points, shrink)
        if z is None:
            continue
        d = float(np.sum((z - x) ** 2))
        if d < best_d:
            best, best_d = z, d
    if best is None:
        raise ValueError("grid oracle found no feasible point")
    return best


def grid_max_2d(fun, lower, upper, resolution=1e-3, feasible=None, chunk=200_000):
    """Maximum of ``fun`` over a rectangle sampled at ``resolution`` (vectorized ``fun``)."""
    xs = np.arange(lower[0], upper[0] + resolution / 2, resolution)
    ys = np.arange(lower[1], upper[1] + resolution / 2, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    Z = np.column_stack([gx.ravel(), gy.ravel()])
    best, arg = -np.inf, None
    for start in range(0, len(Z), chunk):
        block = Z[start : start + chunk]
        if feasible is not None:
            block = block[feasible(block)]
        if not len(block):
            continue
        vals = fun(block)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, arg = float(vals[j]), block[j]
    return best, arg


def cobb_douglas_ratio(a_row, c_row, X):
    """``a0 * prod x_j^a_j / (c0 + c . x)`` for each row of ``X``, written out directly."""
    X = np.atleast_2d(X)
    num = a_row[0] * np.prod(X ** a_row[1:], axis=1)
    den = c_row[0] + X @ c_row[1:]
    return num / den


def randomized_step_expectation(x, x_star, v, steps):
    """Exact conditional mean of ``||x_next - x*||^2`` when ``x_next`` is uniform over ``steps``.

    ``steps`` lists the possible next iterates, one per active component.
    """
    return float(np.mean([np.sum((np.asarray(s) - x_star) ** 2) for s in steps]))


def tolerance_ratio_closed_form(p, m):
    """``min(1, (2m)^(p-1)) / (min(1, m^(p-1)) * m^p)``."""
    return min(1.0, (2.0 * m) ** (p - 1.0)) / (min(1.0, float(m) ** (p - 1.0)) * float(m) ** p)
