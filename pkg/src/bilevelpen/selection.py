"""The penalized follower selection and the single-valued upper objective.

At fixed leader point y and penalty epsilon > 0 the follower solves

    min over x in C of  h(y, x) + sign * eps * f(y, x)^2

with sign = +1 for the worst-case (pessimistic) tie-break and sign = -1
for the best-case (optimistic) one. The leader objective is constant on
the argmin set, which makes y -> f(y, x(y)) single-valued; the constancy
check measures that property at runtime.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .model import GENERAL, LINEAR, QUADRATIC, BilevelProblem, ScalarField
from .lower_solver import _fw_run, enumerate_vertices, vertex_lmo, _simplex_lmo

PESSIMISTIC = +1
OPTIMISTIC = -1


@dataclass(frozen=True)
class SelectionConfig:
    """Knobs for one selection solve; seed fixes the interior starts."""

    sign: int = PESSIMISTIC
    tol: float = 1e-8
    max_iter: int = 2000
    n_starts: Optional[int] = None  # None: min(#vertices, 16)
    seed: int = 0

    def with_sign(self, sign):
        return replace(self, sign=sign)


@dataclass(frozen=True)
class SelectionResult:
    y: np.ndarray
    epsilon: float
    sign: int
    x: np.ndarray
    leader_value: float
    follower_value: float
    penalized_value: float
    fw_gap: float
    n_starts: int

    @property
    def reliable(self):
        return self.fw_gap <= 1e-6


@dataclass(frozen=True)
class ConstancyReport:
    """Spread of the leader objective across near-optimal follower responses."""

    kappa: float
    spread: float
    witnesses: tuple  # (x, leader_value) pairs within tolerance of the best


def penalized_field(problem: BilevelProblem, epsilon: float, sign: int = PESSIMISTIC) -> ScalarField:
    """The follower objective with the squared leader-objective penalty.

    Returns (y, x) -> h(y, x) + sign * eps * f(y, x)^2 with the exact
    composite gradient. The field is declared convex in x only for the
    pessimistic sign when the leader objective's structure guarantees
    convexity of its square (linear, or convex with positive values).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if sign not in (PESSIMISTIC, OPTIMISTIC):
        raise ValueError("sign must be +1 (pessimistic) or -1 (optimistic)")
    f = problem.leader_objective
    h = problem.follower_objective
    s_eps = float(sign) * float(epsilon)

    def evaluate(y, x):
        return h.evaluate(y, x) + s_eps * f.evaluate(y, x) ** 2

    def gradient_x(y, x):
        fv = f.evaluate(y, x)
        return (np.asarray(h.gradient_x(y, x), dtype=float)
                + 2.0 * s_eps * fv * np.asarray(f.gradient_x(y, x), dtype=float))

    def evaluate_batch(y, X):
        return h.batch(y, X) + s_eps * f.batch(y, X) ** 2

    if f.structure == LINEAR and h.structure in (LINEAR, QUADRATIC):
        structure = QUADRATIC
    else:
        structure = GENERAL
    convex = (sign == PESSIMISTIC and h.convex_in_x
              and (f.structure == LINEAR or f.convex_in_x))
    return ScalarField(
        dim_y=f.dim_y, dim_x=f.dim_x,
        evaluate=evaluate, gradient_x=gradient_x,
        structure=structure, convex_in_x=convex,
        evaluate_batch=evaluate_batch, expression=None,
    )


def _start_points(C, n_starts, seed):
    V = enumerate_vertices(C)
    if n_starts <= len(V):
        return [V[i] for i in range(n_starts)]
    rng = np.random.default_rng(seed)
    W = rng.dirichlet(np.ones(len(V)), size=n_starts - len(V))
    return [V[i] for i in range(len(V))] + list(W @ V)


def _resolve_n_starts(C, cfg):
    n_vertices = len(enumerate_vertices(C))
    n = cfg.n_starts if cfg.n_starts is not None else min(n_vertices, 16)
    if cfg.sign == OPTIMISTIC and n < min(n_vertices, 8):
        raise ValueError(
            "optimistic selection is nonconvex; need n_starts >= "
            f"min(#vertices, 8) = {min(n_vertices, 8)}")
    return max(n, 1)


def _run_starts(problem, y, epsilon, cfg):
    """All multistart runs at fixed y; returns the per-start outcomes."""
    y = np.asarray(y, dtype=float)
    if not problem.leader_set.contains(y):
        raise ValueError(f"y={y} is outside the leader box")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    C = problem.follower_set
    section = penalized_field(problem, epsilon, cfg.sign).fix(y)
    n_starts = _resolve_n_starts(C, cfg)
    starts = _start_points(C, n_starts, cfg.seed)
    lmo = vertex_lmo(C.cached_vertices) if C.cached_vertices is not None else _simplex_lmo(C)
    runs = []
    for x0 in starts:
        bx, bval, bgap, _ = _fw_run(section, lmo, x0, cfg.tol, cfg.max_iter)
        runs.append((bval, bx, bgap))
    return y, section, runs, n_starts


def select_response(problem: BilevelProblem, y, epsilon: float,
                    cfg: SelectionConfig = SelectionConfig()) -> SelectionResult:
    """Solve the penalized follower problem at fixed y.

    Multistart Frank-Wolfe from the polytope vertices (plus seeded
    interior points when n_starts exceeds the vertex count); the best
    start by penalized value wins, ties broken by start order. A run
    that never certified its gap still contributes its best point; the
    returned fw_gap > tol marks the result as unreliable rather than
    raising.
    """
    y, _, runs, n_starts = _run_starts(problem, y, epsilon, cfg)
    best_idx = min(range(len(runs)), key=lambda i: (runs[i][0], i))
    _, x, gap = runs[best_idx]
    f = problem.leader_objective
    h = problem.follower_objective
    fv = f.evaluate(y, x)
    hv = h.evaluate(y, x)
    return SelectionResult(
        y=y, epsilon=float(epsilon), sign=cfg.sign, x=x,
        leader_value=float(fv), follower_value=float(hv),
        penalized_value=float(hv + cfg.sign * epsilon * fv ** 2),
        fw_gap=float(gap), n_starts=n_starts,
    )


def upper_value(problem: BilevelProblem, y, epsilon: float,
                cfg: SelectionConfig = SelectionConfig()) -> float:
    """Leader objective at the penalized selection; deterministic per seed."""
    return select_response(problem, y, epsilon, cfg).leader_value


def constancy_check(problem: BilevelProblem, y, epsilon: float,
                    n_starts: int = 16, cfg: SelectionConfig = SelectionConfig(),
                    value_tol: float = 1e-8) -> ConstancyReport:
    """Measure how constant the leader objective is on the argmin set.

    Runs n_starts independent solves (distinct vertices first, then
    seeded interior points), keeps every run whose penalized value lies
    within value_tol of the best, and reports the max-min spread of the
    leader objective over those runs. A spread near zero realizes the
    constant-on-argmin property even when the minimizers form a
    nontrivial face.
    """
    if n_starts < 8:
        raise ValueError("constancy check needs n_starts >= 8")
    cfg = replace(cfg, n_starts=n_starts)
    y, _, runs, _ = _run_starts(problem, y, epsilon, cfg)
    best_val = min(r[0] for r in runs)
    f = problem.leader_objective
    witnesses = []
    for val, x, _ in runs:
        if val <= best_val + value_tol:
            witnesses.append((x, float(f.evaluate(y, x))))
    leaders = [w[1] for w in witnesses]
    best_idx = min(range(len(runs)), key=lambda i: (runs[i][0], i))
    kappa = float(f.evaluate(y, runs[best_idx][1]))
    return ConstancyReport(kappa=kappa,
                           spread=float(max(leaders) - min(leaders)),
                           witnesses=tuple(witnesses))
