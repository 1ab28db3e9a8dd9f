"""Expression compiler: values, gradients, tie rules, error handling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epicert.core import finite_difference_gradients
from epicert.expressions import ExpressionError, compile_expression


def _pts(seed, n=40, d=2, scale=2.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(n, d))


def test_constant_and_coordinate():
    f = compile_expression(3.5, 2)
    p = _pts(0)
    assert np.all(f.values(p) == 3.5)
    assert np.all(f.gradients(p) == 0.0)

    g = compile_expression("x2", 3)
    q = _pts(1, d=3)
    np.testing.assert_array_equal(g.values(q), q[:, 1])
    grads = g.gradients(q)
    np.testing.assert_array_equal(grads[:, 1], np.ones(len(q)))
    np.testing.assert_array_equal(grads[:, [0, 2]], np.zeros((len(q), 2)))


@pytest.mark.parametrize(
    "expr,ref",
    [
        (["+", "x1", "x2", 1], lambda p: p[:, 0] + p[:, 1] + 1.0),
        (["-", "x1", "x2"], lambda p: p[:, 0] - p[:, 1]),
        (["-", "x1"], lambda p: -p[:, 0]),
        (["*", "x1", "x2", 2], lambda p: 2.0 * p[:, 0] * p[:, 1]),
        (["max", "x1", "x2"], lambda p: np.maximum(p[:, 0], p[:, 1])),
        (["min", "x1", "x2"], lambda p: np.minimum(p[:, 0], p[:, 1])),
        (["abs", "x1"], lambda p: np.abs(p[:, 0])),
        (["sqr", "x2"], lambda p: p[:, 1] ** 2),
        (["norm2", "x1", "x2"], lambda p: np.hypot(p[:, 0], p[:, 1])),
        (
            ["-", ["norm2", "x1", "x2"], 1],
            lambda p: np.hypot(p[:, 0], p[:, 1]) - 1.0,
        ),
    ],
)
def test_ops_match_numpy(expr, ref):
    f = compile_expression(expr, 2)
    p = _pts(7)
    np.testing.assert_allclose(f.values(p), ref(p), atol=1e-14)


@pytest.mark.parametrize(
    "expr",
    [
        ["+", ["sqr", "x1"], ["sqr", "x2"]],
        ["*", "x1", "x2"],
        ["-", ["norm2", "x1", "x2"], 1],
        ["max", ["+", "x1", "x2"], ["-", "x1", "x2"]],
        ["abs", ["-", "x1", 0.3]],
    ],
)
def test_gradients_match_finite_differences_off_kinks(expr):
    f = compile_expression(expr, 2)
    rng = np.random.default_rng(11)
    # keep points away from the nonsmooth loci of the expressions above
    p = rng.uniform(0.4, 1.7, size=(30, 2))
    fd = finite_difference_gradients(f.values, p, 1e-6)
    np.testing.assert_allclose(f.gradients(p), fd, atol=1e-7)


def test_max_tie_picks_lowest_index_branch():
    f = compile_expression(["max", "x1", "x2"], 2)
    p = np.array([[0.3, 0.3], [-1.0, -1.0]])
    g = f.gradients(p)
    np.testing.assert_array_equal(g, np.array([[1.0, 0.0], [1.0, 0.0]]))


def test_min_tie_picks_lowest_index_branch():
    f = compile_expression(["min", "x1", "x2"], 2)
    g = f.gradients(np.array([[0.5, 0.5]]))
    np.testing.assert_array_equal(g, np.array([[1.0, 0.0]]))


def test_abs_gradient_zero_at_origin():
    f = compile_expression(["abs", "x1"], 1)
    g = f.gradients(np.array([[0.0], [2.0], [-2.0]]))
    np.testing.assert_array_equal(g[:, 0], np.array([0.0, 1.0, -1.0]))


def test_norm2_gradient_zero_at_origin():
    f = compile_expression(["norm2", "x1", "x2"], 2)
    g = f.gradients(np.array([[0.0, 0.0]]))
    np.testing.assert_array_equal(g, np.zeros((1, 2)))
    vals = f.values(np.zeros((1, 2)))
    assert vals[0] == 0.0


def test_descriptor_text():
    f = compile_expression(["-", ["norm2", "x1", "x2"], 1], 2)
    assert f.descriptor == "(- (norm2 x1 x2) 1)"
    g = compile_expression(["*", "x1", 2.5], 2)
    assert g.descriptor == "(* x1 2.5)"


@pytest.mark.parametrize(
    "expr",
    [
        "x3",                     # out of range for dim 2
        "y1",                     # not a coordinate
        "x0",                     # 1-based indexing
        True,                     # bools are not numbers here
        ["max", True, "x1"],
        [],
        [3, "x1"],                # operator must be a string
        ["frob", "x1"],           # unknown operator
        ["abs", "x1", "x2"],      # arity
        ["-", "x1", "x2", "x1"],  # arity
        ["max"],                  # arity
    ],
)
def test_bad_expressions_raise(expr):
    with pytest.raises(ExpressionError):
        compile_expression(expr, 2)


def test_eval_rejects_wrong_dim():
    f = compile_expression(["+", "x1", "x2"], 2)
    with pytest.raises(ExpressionError):
        f.values(np.zeros((3, 4)))


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(-5, 5, allow_nan=False),
    b=st.floats(-5, 5, allow_nan=False),
)
def test_pointwise_algebra(a, b):
    p = np.array([[a, b]])
    f = compile_expression(
        ["+", ["sqr", "x1"], ["*", -1, ["sqr", "x2"]], ["abs", "x2"]], 2
    )
    want = a * a - b * b + abs(b)
    np.testing.assert_allclose(f.values(p)[0], want, rtol=1e-12, atol=1e-12)
