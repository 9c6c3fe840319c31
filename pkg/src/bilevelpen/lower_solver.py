"""Exact LP and convex minimization over the follower polytope.

Two primitives power everything downstream: a two-phase simplex with
Bland's rule (the linear minimization oracle over C) and Frank-Wolfe for
convex objectives, which needs only that oracle. Vertex enumeration
supports multistarts, brute-force oracles, and fast linear minimization
on small polytopes (the minimum of a linear function over a bounded
polytope is attained at a vertex, so the cached vertex list is an exact
oracle).
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.linalg import qr as scipy_qr

from . import simplex
from .model import DimensionGuardError, FEAS_TOL, Polytope

VERTEX_DIM_GUARD = 12
_DEDUP_DECIMALS = 8


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    value: float
    basis: tuple
    status: str


@dataclass(frozen=True)
class FwSolution:
    x: np.ndarray
    value: float
    fw_gap: float
    iterations: int


def lp_minimize(c, C: Polytope) -> LpSolution:
    """Minimize <c, x> over C with the two-phase Bland simplex.

    For a validated polytope the result is always an optimal vertex;
    infeasible/unbounded statuses can only appear if the polytope
    invariants were bypassed.
    """
    c = np.asarray(c, dtype=float)
    x, value, basis, status = simplex.solve(c, C.A, C.b)
    return LpSolution(x=x, value=value, basis=basis, status=status)


def independent_rows(A, tol=1e-10):
    """Indices of a maximal linearly independent subset of rows."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    rank = np.linalg.matrix_rank(A, tol=tol)
    if rank == A.shape[0]:
        return list(range(A.shape[0]))
    _, _, piv = scipy_qr(A.T, pivoting=True)
    return sorted(piv[:rank])


def enumerate_vertices(C: Polytope) -> np.ndarray:
    """All basic feasible solutions of C, deduplicated; caches the result.

    Guarded to dim <= 12 since enumeration walks every column subset.
    """
    if C.cached_vertices is not None:
        return C.cached_vertices
    n = C.dim
    if n > VERTEX_DIM_GUARD:
        raise DimensionGuardError(
            f"vertex enumeration guarded to dim <= {VERTEX_DIM_GUARD}, got {n}")
    rows = independent_rows(C.A)
    A = C.A[rows]
    b = C.b[rows]
    r = len(rows)
    seen = {}
    for cols in combinations(range(n), r):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b)
        if xb.min() < -FEAS_TOL:
            continue
        v = np.zeros(n)
        v[list(cols)] = xb
        np.maximum(v, 0.0, out=v)
        if np.max(np.abs(C.A @ v - C.b)) > FEAS_TOL:
            continue
        key = tuple(np.round(v, _DEDUP_DECIMALS))
        if key not in seen:
            seen[key] = v
    V = np.array(sorted(seen.values(), key=tuple))
    C.cached_vertices = V
    return V


def vertex_lmo(V):
    """Exact linear minimization oracle backed by an explicit vertex list."""
    V = np.asarray(V, dtype=float)

    def lmo(g):
        return V[int(np.argmin(V @ g))]

    return lmo


def _simplex_lmo(C):
    def lmo(g):
        sol = lp_minimize(g, C)
        if sol.status != "optimal":
            raise RuntimeError(f"linear oracle failed with status {sol.status}")
        return sol.x
    return lmo


def _fw_run(section, lmo, x0, tol, max_iter):
    """One Frank-Wolfe run from x0.

    Returns (best_x, best_value, gap_at_best, iterations). Step sizes:
    exact minimization of the 1-d restriction for fields at most
    quadratic in x, Armijo backtracking otherwise. The endpoint gamma=1
    is always evaluated, so the returned value never exceeds the value
    at any oracle vertex the run visited.
    """
    exact_steps = section.structure in ("linear_in_x", "quadratic_in_x")
    x = np.array(x0, dtype=float)
    fx = section.value(x)
    best_x, best_val, best_gap = x.copy(), fx, None
    iters = 0
    for iters in range(1, max_iter + 1):
        g = section.grad(x)
        v = lmo(g)
        gap = float(g @ (x - v))
        if fx < best_val or (fx == best_val and best_gap is None):
            best_x, best_val, best_gap = x.copy(), fx, gap
        if gap <= tol:
            break
        d = v - x
        f_end = section.value(v)
        if f_end < best_val:
            best_x, best_val, best_gap = v.copy(), f_end, None
        if exact_steps:
            curv = f_end - fx + gap  # phi(1) - phi(0) - phi'(0) with phi'(0) = -gap
            gamma = 1.0 if curv <= 1e-16 else min(1.0, gap / (2.0 * curv))
        else:
            gamma, accepted = 1.0, False
            f_try = f_end
            while gamma > 1e-13:
                if f_try <= fx - 1e-4 * gamma * gap:
                    accepted = True
                    break
                gamma *= 0.5
                f_try = section.value(x + gamma * d)
            if not accepted:
                break  # no sufficient decrease left: numerically stationary
        x = x + gamma * d
        fx = section.value(x)
    if best_gap is None:
        g = section.grad(best_x)
        v = lmo(g)
        best_gap = float(g @ (best_x - v))
    return best_x, best_val, best_gap, iters


def _project_start(start, C):
    start = np.asarray(start, dtype=float)
    if C.residual(start) <= FEAS_TOL:
        return start
    x, status = simplex.feasible_point(C.A, C.b)
    if status != "optimal":
        raise RuntimeError("cannot project start: polytope infeasible")
    return x


def frank_wolfe_minimize(field, C: Polytope, tol=1e-8, max_iter=2000,
                         start=None, y=None) -> FwSolution:
    """Minimize a convex field over C by Frank-Wolfe.

    field is a FieldSection (a field already fixed at some y) or a
    ScalarField together with the keyword y. With an explicit start the
    run is single-start (infeasible starts are replaced by a phase-1
    vertex); with start=None the search restarts from every vertex of C
    and keeps the best point, which is also how the selection layer
    drives it. fw_gap is the linear-oracle duality gap at the returned
    point; for convex fields it bounds value minus the true minimum.

    Non-convergence is not an exception: the result carries fw_gap > tol
    when max_iter ran out first.
    """
    section = field.fix(y) if hasattr(field, "fix") else field
    if start is not None:
        starts = [_project_start(start, C)]
    else:
        if C.dim <= VERTEX_DIM_GUARD:
            starts = list(enumerate_vertices(C))
        else:
            x0, status = simplex.feasible_point(C.A, C.b)
            if status != "optimal":
                raise RuntimeError("polytope infeasible")
            starts = [x0]
    if C.cached_vertices is not None and len(C.cached_vertices):
        lmo = vertex_lmo(C.cached_vertices)
    else:
        lmo = _simplex_lmo(C)
    best = None
    total = 0
    for x0 in starts:
        bx, bval, bgap, iters = _fw_run(section, lmo, x0, tol, max_iter)
        total += iters
        if best is None or bval < best[1]:
            best = (bx, bval, bgap)
        if section.convex_in_x and bgap <= tol:
            break  # certified global minimum for a convex field
    return FwSolution(x=best[0], value=float(best[1]), fw_gap=float(best[2]),
                      iterations=total)
