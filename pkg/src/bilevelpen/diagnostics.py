"""Certificates, slope lower bounds, and empirical error-rate classification.

Three diagnostics relate a solver run to the brute-force oracle:

* build_certificate freezes the oracle's optimal follower/leader levels
  and cross-checks, by sampling C, that three candidate descriptions of
  the optimal set agree (bounds description, sum-sublevel description,
  equality description). Disagreement flags the certificate invalid.
* strong_slope_lower_bound estimates the infimum of the follower
  objective's gradient norm away from its minimizers; a positive bound
  yields a Hoffman-type constant, which drives the linear error rate.
* fit_rate classifies the empirical decay of the oracle-vs-solver gap
  by its log-log slope: linear rate, square-root rate, or, when the gap
  is numerically zero, exact selection.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import LINEAR, BilevelProblem, Polytope
from .lower_solver import _fw_run, enumerate_vertices, independent_rows, vertex_lmo
from .oracle import OracleSolution

RATEFIT_SCHEMA = "ratefit-v1"
CERTIFICATE_SCHEMA = "certificate-v1"

GAP_FLOOR = 1e-12
SLOPE_UNAVAILABLE_CUT = 1e-4

EXACT_SELECTION = "exact_selection"
LINEAR_RATE = "linear_rate"
SQRT_RATE = "sqrt_rate"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Certificate:
    problem: str
    follower_level: float   # optimal follower value
    leader_level: float     # worst-case leader value at the optimum
    level_sum: float        # follower_level + leader_level
    tol: float
    membership: Callable    # x -> bool, the sum-sublevel test on C
    valid: bool
    n_samples: int
    n_counterexamples: int
    counterexamples: tuple  # first few (x, h, f, in_bounds, in_sum, in_equality)


@dataclass(frozen=True)
class SlopeEstimate:
    slope_lower: float
    hoffman_constant: float  # 1 / slope_lower when positive, inf otherwise
    validity: str            # exact_linear | sampled | unavailable


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    classification: str
    tau: float
    n_points: int


def _sample_feasible(C: Polytope, n, rng):
    V = enumerate_vertices(C)
    if n <= len(V):
        return V[:n]
    W = rng.dirichlet(np.ones(len(V)), size=n - len(V))
    return np.vstack([V, W @ V])


def build_certificate(problem: BilevelProblem, oracle: OracleSolution,
                      tol=1e-6, n_samples=1000, seed=0) -> Certificate:
    """Certify the oracle solution by sampled set-description agreement.

    For each sampled x in C the three descriptions of the optimal set are
    evaluated at tolerance tol (the sum description at 2*tol, since it
    adds two bounds): h <= follower_level + tol and f <= leader_level +
    tol; h + f <= level_sum + 2*tol; |h - follower_level| <= tol and
    |f - leader_level| <= tol. Any sample on which the three disagree is
    a counterexample and invalidates the certificate, signalling either
    a wrong oracle value or a failed problem assumption.
    """
    if oracle.problem != problem.name:
        raise ValueError("oracle does not belong to this problem")
    alpha = oracle.follower_value
    beta = oracle.leader_value
    sigma = alpha + beta
    y = oracle.y
    f = problem.leader_objective
    h = problem.follower_objective
    C = problem.follower_set

    def membership(x):
        return bool(C.contains(x)
                    and h.evaluate(y, x) + f.evaluate(y, x) <= sigma + tol)

    rng = np.random.default_rng(seed)
    X = _sample_feasible(C, n_samples, rng)
    hv = h.batch(y, X)
    fv = f.batch(y, X)
    in_bounds = (hv <= alpha + tol) & (fv <= beta + tol)
    in_sum = (hv + fv) <= sigma + 2 * tol
    in_eq = (np.abs(hv - alpha) <= tol) & (np.abs(fv - beta) <= tol)
    bad = (in_bounds != in_sum) | (in_sum != in_eq)
    counterexamples = tuple(
        (X[i], float(hv[i]), float(fv[i]),
         bool(in_bounds[i]), bool(in_sum[i]), bool(in_eq[i]))
        for i in np.nonzero(bad)[0][:32]
    )
    valid = not bad.any() and membership(oracle.x)
    return Certificate(
        problem=problem.name, follower_level=float(alpha),
        leader_level=float(beta), level_sum=float(sigma), tol=float(tol),
        membership=membership, valid=valid, n_samples=len(X),
        n_counterexamples=int(bad.sum()), counterexamples=counterexamples,
    )


def _null_space_directions(C, rng, count):
    A = C.A[independent_rows(C.A)]
    n = C.dim
    # orthonormal basis of the null space of the equality rows
    _, s, Vt = np.linalg.svd(A)
    rank = int((s > 1e-10).sum())
    basis = Vt[rank:]
    if basis.shape[0] == 0:
        return np.empty((0, n))
    coeffs = rng.standard_normal((count, basis.shape[0]))
    dirs = coeffs @ basis
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs / np.maximum(norms, 1e-300)


def strong_slope_lower_bound(field, y, C: Polytope, n_samples=1000,
                             seed=0, exclusion=1e-6) -> SlopeEstimate:
    """Lower-bound the infimum of the gradient norm away from minimizers.

    Linear fields have a constant gradient, so the bound is exact. For
    other fields the candidate set is a feasible sample cloud plus
    probe points just outside the excluded neighborhood of each located
    minimizer (where the infimum is typically attained); candidates that
    are themselves minimal are dropped, matching the convention that the
    slope vanishes at local minima. A bound below 1e-4 is reported as
    unavailable: no useful Hoffman constant follows from it.
    """
    y = np.asarray(y, dtype=float)
    section = field.fix(y)
    V = enumerate_vertices(C)
    if field.structure == LINEAR:
        norm = float(np.linalg.norm(section.grad(V[0])))
        if norm <= 1e-12:
            return SlopeEstimate(slope_lower=0.0, hoffman_constant=math.inf,
                                 validity="unavailable")
        return SlopeEstimate(slope_lower=norm, hoffman_constant=1.0 / norm,
                             validity="exact_linear")

    rng = np.random.default_rng(seed)
    samples = _sample_feasible(C, n_samples, rng)

    lmo = vertex_lmo(V)
    minima = []
    best_val = np.inf
    for x0 in V:
        bx, bval, _, _ = _fw_run(section, lmo, x0, tol=1e-10, max_iter=1000)
        minima.append(bx)
        best_val = min(best_val, bval)
    minima = np.array(minima)

    probe_r = 2.0 * exclusion
    probes = []
    dirs = _null_space_directions(C, rng, 16)
    for m in minima:
        for d in dirs:
            p = m + probe_r * d
            if p.min() >= -1e-12:
                probes.append(np.clip(p, 0.0, None))
    candidates = np.vstack([samples] + ([probes] if probes else []))

    # drop candidates inside the excluded ball of a located minimizer or
    # whose value says they belong to the argmin set
    keep = np.ones(len(candidates), dtype=bool)
    for m in minima:
        keep &= np.linalg.norm(candidates - m, axis=1) > exclusion
    vals = section.value_batch(candidates)
    keep &= vals > best_val + 1e-12 * (1.0 + abs(best_val))
    candidates = candidates[keep]
    if len(candidates) == 0:
        return SlopeEstimate(slope_lower=0.0, hoffman_constant=math.inf,
                             validity="unavailable")
    norms = np.array([np.linalg.norm(section.grad(x)) for x in candidates])
    sigma = float(norms.min())
    if sigma < SLOPE_UNAVAILABLE_CUT:
        return SlopeEstimate(slope_lower=sigma, hoffman_constant=math.inf,
                             validity="unavailable")
    return SlopeEstimate(slope_lower=sigma, hoffman_constant=1.0 / sigma,
                         validity="sampled")


def fit_rate(gaps, tau=0.15) -> RateFit:
    """Classify the decay rate of (epsilon, gap) pairs by log-log slope.

    Gaps at or below the 1e-12 floor are treated as numerically zero; if
    none survive, the selection was exact at every epsilon, which is
    stronger than any power rate. Otherwise at least 4 points spanning
    two decades of epsilon are required for a least-squares fit.
    """
    pts = [(float(e), float(g)) for e, g in gaps if g > GAP_FLOOR]
    if not pts:
        return RateFit(slope=math.inf, intercept=math.nan, r_squared=1.0,
                       classification=EXACT_SELECTION, tau=tau, n_points=0)
    if len(pts) < 4:
        raise ValueError("rate fit needs at least 4 points above the gap floor")
    eps = np.array([p[0] for p in pts])
    if eps.max() / eps.min() < 100.0:
        raise ValueError("rate fit needs epsilons spanning at least two decades")
    gap = np.array([p[1] for p in pts])
    lx, ly = np.log(eps), np.log(gap)
    design = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ np.array([slope, intercept])
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    if slope >= 1.0 - tau:
        cls = LINEAR_RATE
    elif slope >= 0.5 - tau:
        cls = SQRT_RATE
    else:
        cls = INCONCLUSIVE
    return RateFit(slope=float(slope), intercept=float(intercept),
                   r_squared=r2, classification=cls, tau=tau, n_points=len(pts))


# -- reports ----------------------------------------------------------------

def ratefit_to_json(fit: RateFit, problem: Optional[str] = None) -> dict:
    doc = {
        "schema": RATEFIT_SCHEMA,
        "slope": None if math.isinf(fit.slope) else fit.slope,
        "intercept": None if math.isnan(fit.intercept) else fit.intercept,
        "r_squared": fit.r_squared,
        "classification": fit.classification,
        "tau": fit.tau,
        "n_points": fit.n_points,
    }
    if problem is not None:
        doc["problem"] = problem
    return doc


def certificate_to_json(cert: Certificate) -> dict:
    return {
        "schema": CERTIFICATE_SCHEMA,
        "problem": cert.problem,
        "follower_level": cert.follower_level,
        "leader_level": cert.leader_level,
        "level_sum": cert.level_sum,
        "tol": cert.tol,
        "valid": cert.valid,
        "n_samples": cert.n_samples,
        "n_counterexamples": cert.n_counterexamples,
    }


def gaps_to_csv(gaps) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epsilon", "gap"])
    for e, g in gaps:
        writer.writerow([repr(float(e)), repr(float(g))])
    return buf.getvalue()
