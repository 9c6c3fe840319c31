"""Derivative-free maximization of the penalized upper objective.

The upper objective y -> f(y, x_eps(y)) is continuous but has no usable
gradient, so the search is a multistart compass pattern search over the
leader box: poll the 2p axis neighbors, move to a strictly better one,
halve the step otherwise, stop at a mesh resolution. Starts are the box
midpoint plus a scrambled Sobol set; warm starts can be injected ahead
of them.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .model import BilevelProblem, BoxSet
from .selection import SelectionConfig, SelectionResult, select_response


@dataclass(frozen=True)
class UpperConfig:
    n_multistarts: int = 8
    initial_step: Optional[float] = None  # None: (upper - lower) / 4 per coordinate
    shrink: float = 0.5
    min_step: float = 1e-6
    max_evals: int = 20000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if self.initial_step is not None and self.min_step >= self.initial_step:
            raise ValueError("min_step must be smaller than initial_step")
        if self.n_multistarts < 1:
            raise ValueError("need at least one start")


@dataclass(frozen=True)
class PatternSearchResult:
    y: np.ndarray
    value: float
    evals: int
    converged: bool


@dataclass(frozen=True)
class PenalizedSolution:
    y: np.ndarray
    selection: SelectionResult
    value: float
    evals: int
    converged: bool


def _initial_steps(K: BoxSet, cfg: UpperConfig):
    if cfg.initial_step is not None:
        return np.full(K.dim, float(cfg.initial_step))
    span = K.upper - K.lower
    steps = span / 4.0
    # collapsed coordinates still need a positive (if useless) step
    return np.where(steps > cfg.min_step, steps, 10 * cfg.min_step)


def _start_set(K: BoxSet, cfg: UpperConfig, extra_starts):
    starts = []
    if extra_starts is not None:
        starts.extend(K.clip(s) for s in extra_starts)
    starts.append(K.midpoint())
    n_sobol = cfg.n_multistarts - 1
    if n_sobol > 0:
        sampler = qmc.Sobol(d=K.dim, scramble=True, seed=cfg.seed)
        U = sampler.random(1 << (n_sobol - 1).bit_length())[:n_sobol]
        starts.extend(K.lower + U * (K.upper - K.lower))
    return starts


def pattern_search_maximize(value_fn, K: BoxSet, cfg: UpperConfig = UpperConfig(),
                            extra_starts=None) -> PatternSearchResult:
    """Compass search maximization of value_fn over the box K.

    Terminates a start when every step component falls below min_step;
    the whole search stops early when max_evals is exhausted, in which
    case the best point so far is returned with converged=False. The
    returned point is a mesh-local maximizer at resolution min_step,
    clipped to K.
    """
    best_y, best_val = None, -np.inf
    evals = 0
    exhausted = False
    for y0 in _start_set(K, cfg, extra_starts):
        y = K.clip(np.asarray(y0, dtype=float))
        if evals >= cfg.max_evals:
            exhausted = True
            break
        fy = value_fn(y)
        evals += 1
        steps = _initial_steps(K, cfg)
        while np.max(steps) >= cfg.min_step:
            if evals >= cfg.max_evals:
                exhausted = True
                break
            cand_y, cand_val = None, fy
            for i in range(K.dim):
                for direction in (+1.0, -1.0):
                    probe = y.copy()
                    probe[i] += direction * steps[i]
                    probe = K.clip(probe)
                    if np.array_equal(probe, y):
                        continue
                    if evals >= cfg.max_evals:
                        exhausted = True
                        break
                    val = value_fn(probe)
                    evals += 1
                    if val > cand_val:
                        cand_y, cand_val = probe, val
                if exhausted:
                    break
            if exhausted:
                break
            if cand_y is not None:
                y, fy = cand_y, cand_val
            else:
                steps = steps * cfg.shrink
        if fy > best_val:
            best_y, best_val = y, fy
        if exhausted:
            break
    return PatternSearchResult(y=best_y, value=float(best_val), evals=evals,
                               converged=not exhausted)


def solve_penalized(problem: BilevelProblem, epsilon: float, sign: int = +1,
                    cfg: UpperConfig = UpperConfig(),
                    warm_starts=None) -> PenalizedSolution:
    """Maximize the single-valued penalized upper objective over the box.

    Multistart pattern search on y -> upper value at (y, epsilon); the
    reported solution re-solves the selection at the final y so that
    value, selection and feasibility data are consistent. Deterministic
    for a fixed cfg seed. converged=False flags either an exhausted
    evaluation budget or an uncertified final selection.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    sel_cfg = SelectionConfig(sign=sign, seed=cfg.seed)

    def value_fn(y):
        return select_response(problem, y, epsilon, sel_cfg).leader_value

    ps = pattern_search_maximize(value_fn, problem.leader_set, cfg,
                                 extra_starts=warm_starts)
    selection = select_response(problem, ps.y, epsilon, sel_cfg)
    converged = ps.converged and selection.fw_gap <= sel_cfg.tol
    return PenalizedSolution(y=ps.y, selection=selection,
                             value=selection.leader_value,
                             evals=ps.evals, converged=converged)
