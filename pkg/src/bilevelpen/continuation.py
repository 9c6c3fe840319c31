"""Penalty continuation: drive epsilon to zero and record the path.

Each row of a trace solves the penalized problem at one epsilon, warm
starting the leader search from the previous row. For the pessimistic
sign the leader values along the path are nondecreasing as epsilon
shrinks and converge to the worst-case limit value from below; the
optimistic sign mirrors this from above. check_monotone verifies the
appropriate direction up to solver slack, and limit_estimate
extrapolates the limit value from the tail of the trace.
"""

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import BilevelProblem
from .upper_solver import UpperConfig, solve_penalized

TRACE_SCHEMA = "trace-v1"


@dataclass(frozen=True)
class EpsSchedule:
    """Geometric penalty schedule eps0 * rho^k for k = 0 .. k_max - 1."""

    eps0: float = 0.1
    rho: float = 0.5
    k_max: int = 12

    def __post_init__(self):
        if self.eps0 <= 0:
            raise ValueError("eps0 must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1) so the schedule decreases")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")

    def epsilons(self):
        return [self.eps0 * self.rho ** k for k in range(self.k_max)]


@dataclass(frozen=True)
class TraceRow:
    epsilon: float
    y: np.ndarray
    x: np.ndarray
    v: float
    h_value: float
    fw_gap: float
    evals: int
    converged: bool = True


@dataclass
class ContinuationTrace:
    problem: str
    sign: int
    rows: Sequence[TraceRow]
    seed: int = 0

    def __post_init__(self):
        eps = [r.epsilon for r in self.rows]
        if any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
            raise ValueError("trace epsilons must be strictly decreasing")

    def __len__(self):
        return len(self.rows)

    @property
    def epsilons(self):
        return np.array([r.epsilon for r in self.rows])

    @property
    def values(self):
        return np.array([r.v for r in self.rows])


@dataclass(frozen=True)
class MonotoneReport:
    ok: bool
    violations: tuple  # indices k whose pair (k-1, k) breaks the direction


@dataclass(frozen=True)
class LimitEstimate:
    y_limit: np.ndarray
    x_limit: np.ndarray
    v_limit: float


def run_continuation(problem: BilevelProblem, schedule: EpsSchedule = EpsSchedule(),
                     sign: int = +1, cfg: UpperConfig = UpperConfig()) -> ContinuationTrace:
    """Solve the penalized problem along the schedule with warm starts.

    Only the leader point is warm started; the follower response is
    re-solved from scratch each row so a wrong branch of the argmin set
    is not inherited when it jumps. Rows that did not certify keep their
    best point and are flagged, never dropped.
    """
    rows = []
    warm = None
    for eps in schedule.epsilons():
        sol = solve_penalized(problem, eps, sign=sign, cfg=cfg,
                              warm_starts=None if warm is None else [warm])
        sel = sol.selection
        if not problem.leader_set.contains(sol.y):
            raise RuntimeError("solver returned a leader point outside the box")
        if not problem.follower_set.contains(sel.x):
            raise RuntimeError("solver returned an infeasible follower response")
        rows.append(TraceRow(
            epsilon=float(eps), y=np.asarray(sol.y, dtype=float),
            x=np.asarray(sel.x, dtype=float), v=float(sol.value),
            h_value=float(sel.follower_value), fw_gap=float(sel.fw_gap),
            evals=int(sol.evals), converged=bool(sol.converged),
        ))
        warm = sol.y
    return ContinuationTrace(problem=problem.name, sign=sign, rows=tuple(rows),
                             seed=cfg.seed)


def check_monotone(trace: ContinuationTrace, slack: float = 2e-4) -> MonotoneReport:
    """Verify the monotone approach of the trace values to the limit.

    Pessimistic traces must be nondecreasing (within slack) as epsilon
    shrinks; optimistic traces must be nonincreasing. Offending row
    indices are reported.
    """
    if len(trace) == 0:
        raise ValueError("trace is empty")
    v = trace.values
    violations = []
    for k in range(1, len(v)):
        if trace.sign >= 0:
            bad = v[k] < v[k - 1] - slack
        else:
            bad = v[k] > v[k - 1] + slack
        if bad:
            violations.append(k)
    return MonotoneReport(ok=not violations, violations=tuple(violations))


def limit_estimate(trace: ContinuationTrace) -> LimitEstimate:
    """Extrapolate the limit value: fit v = v_inf - a * eps on the last 3 rows."""
    if len(trace) < 3:
        raise ValueError("limit estimate needs at least 3 trace rows")
    tail = trace.rows[-3:]
    eps = np.array([r.epsilon for r in tail])
    v = np.array([r.v for r in tail])
    design = np.vstack([np.ones_like(eps), eps]).T
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    return LimitEstimate(y_limit=trace.rows[-1].y, x_limit=trace.rows[-1].x,
                         v_limit=float(coef[0]))


# -- export ----------------------------------------------------------------

def trace_csv_header(trace: ContinuationTrace) -> list:
    p = len(trace.rows[0].y)
    n = len(trace.rows[0].x)
    return (["epsilon"] + [f"y{i}" for i in range(p)] + [f"x{j}" for j in range(n)]
            + ["v", "h_value", "fw_gap", "evals"])


def trace_to_csv(trace: ContinuationTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(trace_csv_header(trace))
    for r in trace.rows:
        writer.writerow([repr(r.epsilon)] + [repr(v) for v in r.y]
                        + [repr(v) for v in r.x]
                        + [repr(r.v), repr(r.h_value), repr(r.fw_gap), r.evals])
    return buf.getvalue()


def trace_to_json(trace: ContinuationTrace) -> dict:
    return {
        "schema": TRACE_SCHEMA,
        "problem": trace.problem,
        "sign": trace.sign,
        "seed": trace.seed,
        "rows": [
            {
                "epsilon": r.epsilon,
                "y": list(map(float, r.y)),
                "x": list(map(float, r.x)),
                "v": r.v,
                "h_value": r.h_value,
                "fw_gap": r.fw_gap,
                "evals": r.evals,
                "converged": r.converged,
            }
            for r in trace.rows
        ],
    }
