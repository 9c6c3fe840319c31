import numpy as np
import pytest
from hypothesis import given, strategies as st

from bilevelpen import expressions as ex


def ev(text, y, x):
    return ex.compile_evaluator(ex.parse(text))(np.asarray(y, float), np.asarray(x, float))


def test_basic_arithmetic():
    assert ev("1 + 2*3", [], [0.0]) == 7.0
    assert ev("(1 + 2)*3", [], [0.0]) == 9.0
    assert ev("2^3", [], [0.0]) == 8.0
    assert ev("-x[0] + y[0]", [2.0], [5.0]) == -3.0
    assert ev("x[0]/4", [], [2.0]) == 0.5
    assert ev("3.5e-1 + 1", [], [0.0]) == pytest.approx(1.35)


def test_registry_style_expressions():
    y, x = [0.5], [0.25, 0.75, 0.0, 0.0]
    w = 1 + 4 * 0.5 * 0.5
    assert ev("(1 + 4*y[0]*(1 - y[0])) * (1 + x[0] + x[1])", y, x) == pytest.approx(w * 2.0)
    assert ev("(x[0] + x[1] - 1)^2", y, x) == pytest.approx(0.0)


def test_vectorized_evaluation():
    fn = ex.compile_evaluator(ex.parse("x[0]^2 + x[1]"))
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(fn(np.zeros(0), X), [3.0, 13.0])


@pytest.mark.parametrize("bad", [
    "x[0] +", "1 + * 2", "x[", "x[0.5]", "z[0]", "x[0]^x[1]",
    "x[0]^(-1)", "x[0]^1.5", "(1 + 2", "2 @ 3",
])
def test_syntax_errors(bad):
    with pytest.raises(ex.ExpressionError):
        ex.parse(bad)


def test_index_range_check():
    node = ex.parse("x[3] + y[1]")
    with pytest.raises(ex.ExpressionError):
        ex.check_indices(node, dim_y=1, dim_x=2)
    ex.check_indices(node, dim_y=2, dim_x=4)


@pytest.mark.parametrize("text,expected", [
    ("3", 0),
    ("y[0] + 2", 0),
    ("x[0] + y[0]", 1),
    ("x[0]*x[1]", 2),
    ("(x[0] + x[1] - 1)^2", 2),
    ("x[0]^3", 3),
    ("x[0] / (1 + x[1])", None),
    ("x[0] / 2", 1),
    ("y[0]*x[0]^2", 2),
])
def test_degree_in_x(text, expected):
    assert ex.degree_in_x(ex.parse(text)) == expected


@pytest.mark.parametrize("text", [
    "x[0]^2 + 3*x[1]",
    "(x[0] + x[1] - 1)^2",
    "(1 + 4*y[0]*(1 - y[0])) * (1 + x[0] + x[1])",
    "x[0]*x[1] - x[0]^3 + y[0]/2",
    "x[0] / (2 + x[1]^2)",
])
def test_symbolic_gradient_matches_finite_differences(text):
    node = ex.parse(text)
    fn = ex.compile_evaluator(node)
    grads = [ex.compile_evaluator(ex.diff_x(node, j)) for j in range(2)]
    rng = np.random.default_rng(42)
    for _ in range(20):
        y = rng.uniform(0.1, 0.9, size=1)
        x = rng.uniform(0.1, 0.9, size=2)
        for j in range(2):
            e = np.zeros(2)
            e[j] = 1e-6
            fd = (fn(y, x + e) - fn(y, x - e)) / 2e-6
            assert grads[j](y, x) == pytest.approx(fd, rel=1e-5, abs=1e-7)


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=-3, max_value=3))
def test_polynomial_identity(a, b):
    # (a + b)^2 == a^2 + 2ab + b^2 evaluated through the parser
    lhs = ev("(x[0] + x[1])^2", [], [a, b])
    rhs = ev("x[0]^2 + 2*x[0]*x[1] + x[1]^2", [], [a, b])
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
