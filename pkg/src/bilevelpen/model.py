"""Problem data types, standing-assumption validation, and the registry.

A bilevel instance bundles a leader objective f(y, x) to be maximized, a
follower objective h(y, x) minimized over a polytope C at fixed y, a box
K for the leader variable, and the polytope C = {x : Ax = b, x >= 0} for
the follower. The leader objective must be strictly positive on K x C
and the follower objective convex in x; both assumptions are checked by
sampling rather than proved.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import json
import numpy as np

from . import expressions as ex
from . import simplex

LINEAR = "linear_in_x"
QUADRATIC = "quadratic_in_x"
GENERAL = "general"

FEAS_TOL = 1e-9


class ProblemError(ValueError):
    """Base class for problem-construction failures."""


class EmptyFeasibleSetError(ProblemError):
    """The follower polytope {Ax = b, x >= 0} is empty."""


class UnboundedFeasibleSetError(ProblemError):
    """The follower polytope {Ax = b, x >= 0} is unbounded."""


class DimensionGuardError(ProblemError):
    """A combinatorial or grid guard was exceeded."""


class UnknownProblemError(KeyError):
    """Requested registry name is not registered."""


class FieldSection:
    """A scalar field with the leader variable frozen; function of x only."""

    __slots__ = ("value", "grad", "value_batch", "structure", "convex_in_x")

    def __init__(self, value, grad, value_batch, structure, convex_in_x):
        self.value = value
        self.grad = grad
        self.value_batch = value_batch
        self.structure = structure
        self.convex_in_x = convex_in_x


@dataclass(frozen=True)
class ScalarField:
    """A differentiable function (y, x) -> R with declared structure.

    evaluate maps (y, x) to a float; gradient_x returns the gradient in x.
    structure is one of {linear_in_x, quadratic_in_x, general} and
    convex_in_x declares convexity of x -> f(y, x) for every y. The
    declaration is trusted by the solvers and cross-checked by
    validate_problem. evaluate_batch, when given, evaluates a whole
    (N, dim_x) batch of x points at once.
    """

    dim_y: int
    dim_x: int
    evaluate: Callable
    gradient_x: Callable
    structure: str = GENERAL
    convex_in_x: bool = False
    evaluate_batch: Optional[Callable] = None
    expression: Optional[str] = None

    def batch(self, y, X):
        X = np.asarray(X, dtype=float)
        if self.evaluate_batch is not None:
            return np.asarray(self.evaluate_batch(y, X), dtype=float)
        return np.array([self.evaluate(y, x) for x in X], dtype=float)

    def fix(self, y):
        """Freeze the leader variable, yielding a function of x alone."""
        y = np.asarray(y, dtype=float)
        return FieldSection(
            value=lambda x: float(self.evaluate(y, x)),
            grad=lambda x: np.asarray(self.gradient_x(y, x), dtype=float),
            value_batch=lambda X: self.batch(y, X),
            structure=self.structure,
            convex_in_x=self.convex_in_x,
        )


def field_from_expression(text, dim_y, dim_x, convex_hint=None):
    """Build a ScalarField from an expression string.

    Structure (linear/quadratic/general in x) is derived from the
    polynomial degree of the expression; gradients are symbolic.
    Convexity in x is decided automatically for degree <= 2 (constant
    Hessian test) and may be overridden with convex_hint.
    """
    node = ex.parse(text)
    ex.check_indices(node, dim_y, dim_x)
    value_fn = ex.compile_evaluator(node)
    grad_nodes = [ex.diff_x(node, j) for j in range(dim_x)]
    grad_fns = [ex.compile_evaluator(g) for g in grad_nodes]

    degree = ex.degree_in_x(node)
    if degree is None or degree > 2:
        structure = GENERAL
    elif degree == 2:
        structure = QUADRATIC
    else:
        structure = LINEAR

    if convex_hint is not None:
        convex = bool(convex_hint)
    elif structure == LINEAR:
        convex = True
    elif structure == QUADRATIC:
        convex = _quadratic_is_convex(grad_nodes, dim_y, dim_x)
    else:
        convex = False

    def evaluate(y, x):
        return float(value_fn(np.asarray(y, float), np.asarray(x, float)))

    def gradient_x(y, x):
        y = np.asarray(y, float)
        x = np.asarray(x, float)
        return np.array([g(y, x) for g in grad_fns], dtype=float)

    def evaluate_batch(y, X):
        out = value_fn(np.asarray(y, float), np.asarray(X, float))
        return np.broadcast_to(np.asarray(out, float), (X.shape[0],)).copy()

    return ScalarField(
        dim_y=dim_y, dim_x=dim_x,
        evaluate=evaluate, gradient_x=gradient_x,
        structure=structure, convex_in_x=convex,
        evaluate_batch=evaluate_batch, expression=text,
    )


def _quadratic_is_convex(grad_nodes, dim_y, dim_x, trials=5):
    """Constant-in-x Hessian of a degree-2 field; PSD check at sampled y."""
    hess_fns = [[ex.compile_evaluator(ex.diff_x(g, j)) for j in range(dim_x)]
                for g in grad_nodes]
    rng = np.random.default_rng(0)
    x0 = np.zeros(dim_x)
    for _ in range(trials):
        y = rng.uniform(-1.0, 2.0, size=dim_y)
        H = np.array([[hess_fns[i][j](y, x0) for j in range(dim_x)]
                      for i in range(dim_x)], dtype=float)
        H = 0.5 * (H + H.T)
        if np.linalg.eigvalsh(H).min() < -1e-9:
            return False
    return True


@dataclass
class Polytope:
    """The follower feasible set C = {x : Ax = b, x >= 0}.

    Construction verifies C is nonempty and bounded (one LP per
    coordinate direction). cached_vertices is filled lazily by
    enumerate_vertices; manual values are checked for feasibility.
    """

    A: np.ndarray
    b: np.ndarray
    cached_vertices: Optional[np.ndarray] = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ProblemError("A and b row counts differ")
        _, status = simplex.feasible_point(self.A, self.b)
        if status == "infeasible":
            raise EmptyFeasibleSetError("feasible set {Ax=b, x>=0} is empty")
        n = self.A.shape[1]
        for i in range(n):
            c = np.zeros(n)
            c[i] = -1.0  # max x_i
            _, _, _, st = simplex.solve(c, self.A, self.b)
            if st == "unbounded":
                raise UnboundedFeasibleSetError(
                    f"feasible set unbounded in coordinate {i}")
            c[i] = 1.0  # min x_i (trivially bounded by x >= 0, checked anyway)
            _, _, _, st = simplex.solve(c, self.A, self.b)
            if st == "unbounded":
                raise UnboundedFeasibleSetError(
                    f"feasible set unbounded in coordinate {i}")
        if self.cached_vertices is not None:
            V = np.atleast_2d(np.asarray(self.cached_vertices, dtype=float))
            for v in V:
                if not self.contains(v):
                    raise ProblemError(f"cached vertex {v} is not feasible")
            self.cached_vertices = V

    @property
    def dim(self):
        return self.A.shape[1]

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        return (np.max(np.abs(self.A @ x - self.b)) <= tol
                and np.min(x) >= -tol)

    def residual(self, x):
        x = np.asarray(x, dtype=float)
        return max(float(np.max(np.abs(self.A @ x - self.b))),
                   float(max(0.0, -np.min(x))))


@dataclass(frozen=True)
class BoxSet:
    """An axis-aligned box for the leader variable."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape:
            raise ProblemError("box bound shapes differ")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ProblemError("box bounds must be finite")
        if np.any(lo > hi):
            raise ProblemError("box lower bound exceeds upper bound")

    @property
    def dim(self):
        return self.lower.shape[0]

    def contains(self, y, tol=1e-12):
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lower - tol) and np.all(y <= self.upper + tol))

    def clip(self, y):
        return np.clip(np.asarray(y, dtype=float), self.lower, self.upper)

    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    def sample(self, rng, size=None):
        if size is None:
            return rng.uniform(self.lower, self.upper)
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))


@dataclass
class BilevelProblem:
    """A validated bundle (leader objective, follower objective, K, C)."""

    name: str
    leader_objective: ScalarField
    follower_objective: ScalarField
    leader_set: BoxSet
    follower_set: Polytope

    def __post_init__(self):
        f, h = self.leader_objective, self.follower_objective
        if f.dim_y != h.dim_y or f.dim_y != self.leader_set.dim:
            raise ProblemError("leader dimension mismatch")
        if f.dim_x != h.dim_x or f.dim_x != self.follower_set.dim:
            raise ProblemError("follower dimension mismatch")
        if not h.convex_in_x:
            raise ProblemError("follower objective must be declared convex in x")

    @property
    def dim_y(self):
        return self.leader_objective.dim_y

    @property
    def dim_x(self):
        return self.leader_objective.dim_x


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    witness: Optional[tuple]
    worst_value: float


@dataclass(frozen=True)
class ValidationReport:
    checks: Sequence[CheckResult]

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _feasible_samples(C, n, rng):
    """Random points of C: its vertices plus Dirichlet mixtures of them."""
    from .lower_solver import enumerate_vertices  # local import, no cycle at module load

    V = enumerate_vertices(C)
    if n <= len(V):
        return V[:n]
    W = rng.dirichlet(np.ones(len(V)), size=n - len(V))
    return np.vstack([V, W @ V])


def validate_problem(problem, samples=500, seed=0):
    """Check the standing assumptions by sampling K x C.

    Runs four checks: positivity of the leader objective, convexity in x
    of the follower objective (midpoint tests on random segments inside
    C), gradient consistency of both fields against central finite
    differences, and boundedness of C. A failing check carries a witness
    point.
    """
    if samples < 100:
        raise ValueError("samples must be at least 100")
    rng = np.random.default_rng(seed)
    f, h = problem.leader_objective, problem.follower_objective
    K, C = problem.leader_set, problem.follower_set

    X = _feasible_samples(C, samples, rng)
    Y = K.sample(rng, size=samples)

    # positivity of the leader objective on K x C
    worst_val, worst_pt = np.inf, None
    for i in range(samples):
        y, x = Y[i], X[i % len(X)]
        v = f.evaluate(y, x)
        if not np.isfinite(v):
            worst_val, worst_pt = v, (y.copy(), x.copy())
            break
        if v < worst_val:
            worst_val, worst_pt = v, (y.copy(), x.copy())
    positivity = CheckResult("positivity", bool(worst_val > 0.0), worst_pt, float(worst_val))

    # convexity in x of the follower objective: midpoint test on segments
    conv_ok, conv_wit, conv_worst = True, None, -np.inf
    for i in range(samples):
        y = Y[i]
        xa, xb = X[rng.integers(len(X))], X[rng.integers(len(X))]
        mid = 0.5 * (xa + xb)
        gap = h.evaluate(y, mid) - 0.5 * (h.evaluate(y, xa) + h.evaluate(y, xb))
        if gap > conv_worst:
            conv_worst, conv_wit = gap, (y.copy(), mid.copy())
        if gap > 1e-9:
            conv_ok = False
    convexity = CheckResult("convexity_in_x", conv_ok, conv_wit, float(conv_worst))

    # gradient consistency against central differences
    grad_ok, grad_wit, grad_worst = True, None, 0.0
    n_grad = min(64, samples)
    for i in range(n_grad):
        y, x = Y[i], X[i % len(X)]
        for fld in (f, h):
            err = _gradient_relative_error(fld, y, x)
            if err > grad_worst:
                grad_worst, grad_wit = err, (y.copy(), x.copy())
            if err > 1e-5:
                grad_ok = False
    gradients = CheckResult("gradient_consistency", grad_ok, grad_wit, float(grad_worst))

    # boundedness of C (re-derived; construction already enforces it)
    bounded = CheckResult("boundedness", True, None,
                          float(np.max(np.abs(_feasible_samples(C, 2, rng)))))

    return ValidationReport(checks=(positivity, convexity, gradients, bounded))


def _gradient_relative_error(fld, y, x, step=1e-6):
    g = np.asarray(fld.gradient_x(y, x), dtype=float)
    fd = np.zeros_like(g)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = step
        fd[j] = (fld.evaluate(y, x + e) - fld.evaluate(y, x - e)) / (2 * step)
    scale = max(1.0, float(np.linalg.norm(g)))
    return float(np.linalg.norm(g - fd)) / scale


def shift_objective(f, y0, x0):
    """Nonnegative replacement for a leader objective of arbitrary sign.

    Returns the field (max(f - f(y0, x0), 0))^2, which is >= 0 everywhere
    and vanishes at the anchor (y0, x0). Structure degrades to general.
    """
    y0 = np.asarray(y0, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if y0.shape != (f.dim_y,) or x0.shape != (f.dim_x,):
        raise ProblemError("anchor dimensions do not match the field")
    c = f.evaluate(y0, x0)

    def evaluate(y, x):
        return max(f.evaluate(y, x) - c, 0.0) ** 2

    def gradient_x(y, x):
        r = max(f.evaluate(y, x) - c, 0.0)
        return 2.0 * r * np.asarray(f.gradient_x(y, x), dtype=float)

    def evaluate_batch(y, X):
        return np.maximum(f.batch(y, X) - c, 0.0) ** 2

    return ScalarField(
        dim_y=f.dim_y, dim_x=f.dim_x,
        evaluate=evaluate, gradient_x=gradient_x,
        structure=GENERAL, convex_in_x=f.convex_in_x,
        evaluate_batch=evaluate_batch, expression=None,
    )


# -- registry -------------------------------------------------------------

_REGISTRY = {}


def registry_register(name, factory):
    _REGISTRY[name] = factory


def registry_names():
    return sorted(_REGISTRY)


def registry_get(name):
    """Return a fresh instance of a registered problem."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownProblemError(f"unknown problem {name!r}; "
                                  f"known: {', '.join(registry_names())}") from None
    return factory()


def _make_fs():
    # Follower set is the segment z1 + z2 = 1, z >= 0. The follower
    # objective is identically zero, so every feasible point is optimal
    # and the worst-case selection does all the work.
    f = field_from_expression("1 + 4*y[0]*(1 - y[0]) + x[0]", dim_y=1, dim_x=2)
    h = field_from_expression("0", dim_y=1, dim_x=2)
    return BilevelProblem(
        name="FS",
        leader_objective=f,
        follower_objective=h,
        leader_set=BoxSet(lower=[0.0], upper=[1.0]),
        follower_set=Polytope(A=[[1.0, 1.0]], b=[1.0]),
    )


def _make_qb():
    # Unit box in (z1, z2) written with slacks; the follower objective is
    # minimized on the whole band z1 + z2 = 1, on which the leader
    # objective is constant in x.
    f = field_from_expression(
        "(1 + 4*y[0]*(1 - y[0])) * (1 + x[0] + x[1])", dim_y=1, dim_x=4)
    h = field_from_expression("(x[0] + x[1] - 1)^2", dim_y=1, dim_x=4)
    return BilevelProblem(
        name="QB",
        leader_objective=f,
        follower_objective=h,
        leader_set=BoxSet(lower=[0.0], upper=[1.0]),
        follower_set=Polytope(A=[[1.0, 0.0, 1.0, 0.0],
                                 [0.0, 1.0, 0.0, 1.0]], b=[1.0, 1.0]),
    )


registry_register("FS", _make_fs)
registry_register("QB", _make_qb)


# -- JSON problem documents ------------------------------------------------

def problem_from_dict(doc):
    """Build a problem from the JSON document schema.

    Expected keys: name, dim_y, dim_x, A (row-major nested lists), b,
    K_lower, K_upper, f, h (expression strings).
    """
    required = ("name", "dim_y", "dim_x", "A", "b", "K_lower", "K_upper", "f", "h")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ProblemError(f"problem document missing keys: {missing}")
    dim_y, dim_x = int(doc["dim_y"]), int(doc["dim_x"])
    f = field_from_expression(doc["f"], dim_y=dim_y, dim_x=dim_x)
    h = field_from_expression(doc["h"], dim_y=dim_y, dim_x=dim_x)
    A = np.atleast_2d(np.asarray(doc["A"], dtype=float))
    if A.shape[1] != dim_x:
        raise ProblemError(f"A has {A.shape[1]} columns, expected dim_x={dim_x}")
    K = BoxSet(lower=doc["K_lower"], upper=doc["K_upper"])
    if K.dim != dim_y:
        raise ProblemError("box bounds do not match dim_y")
    return BilevelProblem(
        name=str(doc["name"]),
        leader_objective=f,
        follower_objective=h,
        leader_set=K,
        follower_set=Polytope(A=A, b=doc["b"]),
    )


def problem_to_dict(problem):
    f, h = problem.leader_objective, problem.follower_objective
    if f.expression is None or h.expression is None:
        raise ProblemError("only expression-backed problems can be serialized")
    return {
        "name": problem.name,
        "dim_y": problem.dim_y,
        "dim_x": problem.dim_x,
        "A": problem.follower_set.A.tolist(),
        "b": problem.follower_set.b.tolist(),
        "K_lower": problem.leader_set.lower.tolist(),
        "K_upper": problem.leader_set.upper.tolist(),
        "f": f.expression,
        "h": h.expression,
    }


def load_problem(path):
    with open(path) as fh:
        return problem_from_dict(json.load(fh))


def save_problem(problem, path):
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem), fh, indent=2)
        fh.write("\n")


def resolve_problem(name_or_path):
    """Registry name or path to a problem JSON document."""
    if name_or_path in _REGISTRY:
        return registry_get(name_or_path)
    import os
    if os.path.exists(name_or_path):
        return load_problem(name_or_path)
    raise UnknownProblemError(
        f"unknown problem {name_or_path!r} (not registered, not a file)")
