"""Brute-force ground truth for the nested problem, independent of the solver.

The exact follower argmin set is described either by the optimal face's
vertices (follower objective linear or constant in x) or by a dense grid
cloud on the intrinsic coordinates of C (slack variables eliminated).
The worst-case response minimizes the squared leader objective over that
description, and the three-level oracle maximizes the resulting value
over a leader grid with a local compass polish. Oracle values certify
the penalty solver's convergence and error rates.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.linalg import qr as scipy_qr

from .model import (GENERAL, LINEAR, QUADRATIC, BilevelProblem,
                    DimensionGuardError, FEAS_TOL, FieldSection)
from .lower_solver import _fw_run, enumerate_vertices, independent_rows, lp_minimize, vertex_lmo

ORACLE_SCHEMA = "oracle-v1"

GRID_DIM_GUARD = 4
GRID_EVAL_GUARD = 10 ** 7


@dataclass(frozen=True)
class LowerSetDescription:
    kind: str  # single_point | vertex_face | grid_cloud
    points: np.ndarray
    value: float


@dataclass(frozen=True)
class PessimisticResponse:
    x: np.ndarray
    value: float


@dataclass(frozen=True)
class OracleSolution:
    problem: str
    y: np.ndarray
    x: np.ndarray
    leader_value: float    # leader objective at the certified solution
    follower_value: float  # follower objective there
    method: str            # face_enum | grid
    resolution: float


def _intrinsic_grid(C, step):
    """Grid the polytope over its free coordinates after slack elimination.

    Picks a well-conditioned basic column set by QR pivoting, bounds each
    free coordinate by LPs, and assembles full feasible points. Guarded
    to 4 intrinsic dimensions and 1e7 grid points.
    """
    rows = independent_rows(C.A)
    A = C.A[rows]
    b = C.b[rows]
    r, n = A.shape[0], C.dim
    free_dim = n - r
    if free_dim > GRID_DIM_GUARD:
        raise DimensionGuardError(
            f"grid oracle guarded to {GRID_DIM_GUARD} intrinsic dims, got {free_dim}")
    if free_dim == 0:
        x = np.linalg.solve(A, b)
        return x.reshape(1, -1) if x.min() >= -FEAS_TOL else np.empty((0, n))
    _, _, piv = scipy_qr(A, pivoting=True)
    basic = sorted(piv[:r])
    free = [j for j in range(n) if j not in basic]
    B = A[:, basic]
    N = A[:, free]

    axes = []
    for j in free:
        c = np.zeros(n)
        c[j] = 1.0
        lo = lp_minimize(c, C).value
        c[j] = -1.0
        hi = -lp_minimize(c, C).value
        if hi - lo <= step * 1e-9:
            axes.append(np.array([lo]))
        else:
            axes.append(np.linspace(lo, hi, int(round((hi - lo) / step)) + 1))
    size = int(np.prod([len(a) for a in axes]))
    if size > GRID_EVAL_GUARD:
        raise DimensionGuardError(
            f"grid of {size} points exceeds the {GRID_EVAL_GUARD} guard; coarsen the step")
    mesh = np.meshgrid(*axes, indexing="ij")
    Xfree = np.stack([m.ravel() for m in mesh], axis=1)
    X = np.zeros((Xfree.shape[0], n))
    X[:, free] = Xfree
    X[:, basic] = np.linalg.solve(B, b[:, None] - N @ Xfree.T).T
    mask = X.min(axis=1) >= -FEAS_TOL
    return X[mask]


def _grid_for(C, step):
    cache = getattr(C, "_grid_cache", None)
    if cache is None:
        cache = {}
        C._grid_cache = cache
    if step not in cache:
        cache[step] = _intrinsic_grid(C, step)
    return cache[step]


def exact_lower_set(problem: BilevelProblem, y, tol=1e-8,
                    grid_step=1e-3) -> LowerSetDescription:
    """The follower argmin set at fixed y, described exactly or on a grid.

    A follower objective that is linear (or constant) in x attains its
    minimum on a face; the description is that face's vertex set. Other
    objectives fall back to a dense grid cloud of near-minimal points.
    Membership uses the hybrid cutoff tol * (1 + |min|).
    """
    y = np.asarray(y, dtype=float)
    h = problem.follower_objective
    C = problem.follower_set
    if h.structure == LINEAR:
        V = enumerate_vertices(C)
        vals = h.batch(y, V)
        m = float(vals.min())
        cut = tol * (1.0 + abs(m))
        pts = V[vals <= m + cut]
        kind = "single_point" if len(pts) == 1 else "vertex_face"
        return LowerSetDescription(kind=kind, points=pts, value=m)
    X = _grid_for(C, grid_step)
    vals = h.batch(y, X)
    m = float(vals.min())
    cut = tol * (1.0 + abs(m))
    pts = X[vals <= m + cut]
    kind = "single_point" if len(pts) == 1 else "grid_cloud"
    return LowerSetDescription(kind=kind, points=pts, value=m)


def _square_section(f, y):
    fy = f.fix(y)
    structure = QUADRATIC if f.structure == LINEAR else GENERAL
    return FieldSection(
        value=lambda x: fy.value(x) ** 2,
        grad=lambda x: 2.0 * fy.value(x) * fy.grad(x),
        value_batch=lambda X: fy.value_batch(X) ** 2,
        structure=structure,
        convex_in_x=(f.structure == LINEAR or f.convex_in_x),
    )


def pessimistic_select(problem: BilevelProblem, y, tol=1e-8,
                       grid_step=1e-3) -> PessimisticResponse:
    """Worst-case follower response: minimize the squared leader objective
    over the exact follower argmin set."""
    y = np.asarray(y, dtype=float)
    desc = exact_lower_set(problem, y, tol=tol, grid_step=grid_step)
    f = problem.leader_objective
    if desc.kind == "single_point":
        x = desc.points[0]
        return PessimisticResponse(x=x, value=float(f.evaluate(y, x)))
    if desc.kind == "vertex_face":
        section = _square_section(f, y)
        lmo = vertex_lmo(desc.points)
        best = None
        for x0 in desc.points:
            bx, bval, _, _ = _fw_run(section, lmo, x0, tol=1e-12, max_iter=500)
            if best is None or bval < best[1]:
                best = (bx, bval)
        return PessimisticResponse(x=best[0], value=float(f.evaluate(y, best[0])))
    fvals = f.batch(y, desc.points)
    i = int(np.argmin(fvals ** 2))
    return PessimisticResponse(x=desc.points[i], value=float(fvals[i]))


def _leader_grid(K, step, budget_points):
    """Leader grid points and the realized per-axis spacing."""
    axes = []
    for i in range(K.dim):
        span = K.upper[i] - K.lower[i]
        if span <= 0:
            axes.append(np.array([K.lower[i]]))
        else:
            axes.append(np.linspace(K.lower[i], K.upper[i],
                                    int(round(span / step)) + 1))
    total = int(np.prod([len(a) for a in axes]))
    if total > budget_points:
        scale = (budget_points / total) ** (1.0 / K.dim)
        axes = [a if len(a) <= 3 else
                np.linspace(a[0], a[-1], max(3, int(len(a) * scale)))
                for a in axes]
    spacing = max((a[1] - a[0]) for a in axes if len(a) > 1) if any(
        len(a) > 1 for a in axes) else step
    return [np.array(y) for y in product(*axes)], float(spacing)


def _compass_polish(value_fn, K, y0, v0, initial_step, min_step, max_evals=500):
    y, fy = np.array(y0, dtype=float), v0
    steps = np.full(K.dim, max(initial_step, 10 * min_step))
    evals = 0
    while np.max(steps) >= min_step and evals < max_evals:
        cand_y, cand_val = None, fy
        for i in range(K.dim):
            for direction in (+1.0, -1.0):
                probe = K.clip(y + direction * steps[i] * np.eye(K.dim)[i])
                if np.array_equal(probe, y):
                    continue
                val = value_fn(probe)
                evals += 1
                if val > cand_val:
                    cand_y, cand_val = probe, val
        if cand_y is not None:
            y, fy = cand_y, cand_val
        else:
            steps *= 0.5
    return y, fy


def solve_three_level(problem: BilevelProblem, y_grid_step=1e-3, tol=1e-8,
                      x_grid_step=1e-3) -> OracleSolution:
    """Maximize the worst-case follower value over a leader grid.

    The leader grid is coarsened when the total evaluation count would
    exceed the guard, and a compass polish at resolution y_grid_step/10
    recovers the stated accuracy afterward. Guarded to two leader
    dimensions.
    """
    K = problem.leader_set
    if K.dim > 2:
        raise DimensionGuardError("three-level oracle guarded to <= 2 leader dims")
    h = problem.follower_objective
    if h.structure == LINEAR:
        cost_per_y = max(1, len(enumerate_vertices(problem.follower_set)))
        method = "face_enum"
    else:
        cost_per_y = max(1, len(_grid_for(problem.follower_set, x_grid_step)))
        method = "grid"

    def value_fn(y):
        return pessimistic_select(problem, y, tol=tol, grid_step=x_grid_step).value

    budget_points = max(3, GRID_EVAL_GUARD // cost_per_y)
    grid, spacing = _leader_grid(K, y_grid_step, budget_points)
    vals = [value_fn(y) for y in grid]
    i_best = int(np.argmax(vals))
    resolution = y_grid_step / 10.0
    y_best, _ = _compass_polish(value_fn, K, grid[i_best], vals[i_best],
                                initial_step=spacing, min_step=resolution)
    response = pessimistic_select(problem, y_best, tol=tol, grid_step=x_grid_step)
    f = problem.leader_objective
    h_val = problem.follower_objective.evaluate(y_best, response.x)
    return OracleSolution(
        problem=problem.name, y=y_best, x=response.x,
        leader_value=float(f.evaluate(y_best, response.x)),
        follower_value=float(h_val), method=method, resolution=resolution,
    )


def gap_table(oracle: OracleSolution, trace) -> list:
    """Pair each trace epsilon with the oracle-vs-trace leader value gap."""
    if oracle.problem != trace.problem:
        raise ValueError(
            f"oracle is for {oracle.problem!r} but trace is for {trace.problem!r}")
    return [(r.epsilon, oracle.leader_value - r.v) for r in trace.rows]


def oracle_to_json(oracle: OracleSolution) -> dict:
    return {
        "schema": ORACLE_SCHEMA,
        "problem": oracle.problem,
        "y_best": list(map(float, oracle.y)),
        "x_best": list(map(float, oracle.x)),
        "leader_value": oracle.leader_value,
        "follower_value": oracle.follower_value,
        "method": oracle.method,
        "resolution": oracle.resolution,
    }
