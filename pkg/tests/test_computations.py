import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dfsq.computations import (
    BUILTINS,
    computation_from_config,
    finite_difference,
    make_computation,
    stack,
)
from dfsq.errors import InvalidInputError, InvalidParameterError


def test_eval_examples():
    assert make_computation("square").eval(np.array([3.0]))[0] == 9.0
    assert make_computation("min_of_N", 3).eval(np.array([2.0, 5.0, 1.0]))[0] == 1.0
    assert make_computation("exp_neg_abs").eval(np.array([0.0]))[0] == 1.0


def test_partial_examples():
    assert make_computation("square").partial(0, np.array([2.0]))[0] == 4.0
    m = make_computation("min_of_N", 3)
    x = np.array([1.0, 3.0, 4.0])
    assert m.partial(0, x)[0] == 1.0
    assert m.partial(1, x)[0] == 0.0
    assert abs(make_computation("exp_neg_abs").partial(0, np.array([-1.0]))[0]) == pytest.approx(
        math.exp(-1))


def test_arity_mismatch():
    with pytest.raises(InvalidInputError):
        make_computation("min_of_N", 3).eval(np.ones((4, 2)))
    with pytest.raises(InvalidInputError):
        make_computation("square").partial(1, np.ones(3))


def test_unknown_and_bad_arity():
    with pytest.raises(InvalidParameterError):
        make_computation("cube")
    with pytest.raises(InvalidParameterError):
        make_computation("square", 2)


def _points(kind, arity, rng, count=1000):
    if kind in ("one_minus_exp_neg",):
        return rng.uniform(0, 5, (count, arity))
    return rng.normal(0, 2, (count, arity))


@pytest.mark.parametrize("kind,arity", [
    ("identity", 1), ("square", 1), ("exp_neg_abs", 1), ("one_minus_exp_neg", 1),
    ("separable_sum_of_squares", 4), ("min_of_N", 5),
])
def test_partials_match_finite_differences(kind, arity, rng):
    g = make_computation(kind, arity)
    x = _points(kind, arity, rng)
    if kind == "min_of_N":
        # keep away from ties, where min is not differentiable
        srt = np.sort(x, axis=1)
        x = x[(srt[:, 1] - srt[:, 0]) > 1e-3]
    if kind == "exp_neg_abs":
        x = x[np.abs(x[:, 0]) > 1e-3]
    for n in range(arity):
        exact = g.partial(n, x)
        fd = finite_difference(g, n, x)
        tol = np.maximum(1e-6, 1e-4 * np.abs(exact))
        assert np.all(np.abs(exact - fd) <= tol)


@given(arrays(np.float64, (3,), elements=st.floats(-10, 10)), st.integers(0, 2),
       st.floats(-10, 10))
def test_separable_partial_depends_only_on_own_coordinate(x, n, other):
    g = make_computation("separable_sum_of_squares", 3)
    y = x.copy()
    y[(n + 1) % 3] = other
    assert g.partial(n, x)[0] == g.partial(n, y)[0] == 2 * x[n]


def test_min_tie_rule_and_nonsmooth_flag():
    g = make_computation("min_of_N", 3)
    x = np.array([[2.0, 1.0, 1.0]])
    assert g.nonsmooth(x)[0]
    assert g.partial(1, x)[0] == 1.0 and g.partial(2, x)[0] == 0.0
    assert not g.nonsmooth(np.array([[1.0, 2.0, 3.0]]))[0]


def test_exp_neg_abs_nonsmooth_at_zero():
    g = make_computation("exp_neg_abs")
    assert list(g.nonsmooth(np.array([0.0, 0.1]))) == [True, False]


def test_second_partial_bounds_declared():
    for kind in BUILTINS:
        arity = 2 if kind in ("separable_sum_of_squares", "min_of_N") else 1
        assert make_computation(kind, arity).second_partial_bound is not None


def test_stack_and_component():
    sq = make_computation("separable_sum_of_squares", 2)
    mn = make_computation("min_of_N", 2)
    v = stack(sq, mn)
    x = np.array([[1.0, 2.0], [3.0, -1.0]])
    assert v.output_dim == 2
    np.testing.assert_array_equal(v.eval(x), np.column_stack([sq.eval(x), mn.eval(x)]))
    np.testing.assert_array_equal(v.component(1).partial(0, x), mn.partial(0, x))


def test_config_record():
    g = computation_from_config({"kind": "min_of_N", "arity": 4})
    assert g.arity == 4
