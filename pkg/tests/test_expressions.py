import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spacetime_pg.expressions import EvaluationError, Expression, ExpressionError, parse_expression

TABLE = [
    ("sin(t)", dict(t=math.pi / 2), 1.0),
    ("2+3*4", {}, 14.0),
    ("-2^2", {}, -4.0),
    ("2^-1", {}, 0.5),
    ("2^3^2", {}, 512.0),
    ("(2^3)^2", {}, 64.0),
    ("(-2)^2", {}, 4.0),
    ("10-4-3", {}, 3.0),
    ("24/4/3", {}, 2.0),
    ("2*(3+4)", {}, 14.0),
    ("--3", {}, 3.0),
    ("-3*-2", {}, 6.0),
    ("x", dict(x=0.25), 0.25),
    ("x*y", dict(x=3.0, y=-2.0), -6.0),
    ("x^2+y^2", dict(x=3.0, y=4.0), 25.0),
    ("sqrt(x^2+y^2)", dict(x=3.0, y=4.0), 5.0),
    ("cos(pi)", {}, -1.0),
    ("cos(0)", {}, 1.0),
    ("exp(0)", {}, 1.0),
    ("exp(1)", {}, math.e),
    ("abs(-7.5)", {}, 7.5),
    ("abs(x-1)", dict(x=0.25), 0.75),
    ("1e3", {}, 1000.0),
    (".5+1.5", {}, 2.0),
    ("2.5E-1", {}, 0.25),
    ("sin(t)*exp(-t)", dict(t=0.0), 0.0),
    ("t*(1-t)", dict(t=0.5), 0.25),
    ("pi/2", {}, math.pi / 2),
    ("1 + 2 * 3 ^ 2", {}, 19.0),
    ("sqrt(16)/2-1", {}, 1.0),
]


@pytest.mark.parametrize("text, point, value", TABLE)
def test_hand_computed_table(text, point, value):
    assert abs(parse_expression(text)(**point) - value) <= 1e-14


def test_table_size():
    assert len(TABLE) == 30


def test_vectorized_evaluation():
    e = Expression("x*y + t")
    x = np.array([0.0, 1.0, 2.0])
    assert np.array_equal(e(t=1.0, x=x, y=2 * x), [1.0, 3.0, 9.0])


def test_spatial_function_on_1d_points():
    fn = Expression("x + y + t").spatial(2.0)
    assert np.array_equal(fn(np.array([[0.5], [1.0]])), [2.5, 3.0])
    const = Expression("3").spatial()
    assert np.array_equal(const(np.zeros((4, 2))), np.full(4, 3.0))


@pytest.mark.parametrize("text, offset, fragment", [
    ("2 + foo", 4, "unknown identifier"),
    ("(1+2", 4, "unbalanced"),
    ("1+2)", 3, "unbalanced"),
    ("1 2", 2, "trailing"),
    ("3 $ 4", 2, "unexpected character"),
    ("sin 3", 4, "needs an argument"),
    ("", 0, "end of input"),
    ("2*", 2, "end of input"),
    ("1e999", 0, "out of range"),
])
def test_parse_errors_carry_offset(text, offset, fragment):
    with pytest.raises(ExpressionError, match=fragment) as info:
        parse_expression(text)
    assert info.value.offset == offset


def test_offset_counts_bytes():
    with pytest.raises(ExpressionError) as info:
        parse_expression("1 + é")
    assert info.value.offset == 4


@pytest.mark.parametrize("text, point, offset", [
    ("1/x", dict(x=0.0), 1),
    ("2 + sqrt(x)", dict(x=-1.0), 4),
    ("exp(x)", dict(x=1e6), 0),
])
def test_evaluation_error_located(text, point, offset):
    with pytest.raises(EvaluationError) as info:
        parse_expression(text)(**point)
    assert info.value.offset == offset


def test_variables():
    assert Expression("sin(t)*x + pi").variables == {"t", "x"}
    assert Expression("3").variables == set()


def test_canonical_form():
    assert Expression("-2^2").canonical() == "(-(2.0 ^ 2.0))"
    assert Expression("1+2*x").canonical() == "(1.0 + (2.0 * x))"
    assert Expression(" sin( t ) ") == Expression("sin(t)")


names = st.sampled_from(["t", "x", "y", "pi"])
numbers = st.floats(0, 1e6, allow_nan=False, allow_infinity=False)
leaves = st.one_of(numbers.map(repr), names)


def extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*/^"), children).map(lambda p: f"({p[0]}){p[1]}({p[2]})"),
        children.map(lambda c: f"-({c})"),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "sqrt", "abs"]), children).map(
            lambda p: f"{p[0]}({p[1]})"),
    )


@settings(max_examples=200, deadline=None)
@given(st.recursive(leaves, extend, max_leaves=12))
def test_print_parse_round_trip(text):
    e = parse_expression(text)
    again = parse_expression(e.canonical())
    assert again == e
    assert again.canonical() == e.canonical()


@settings(max_examples=200, deadline=None)
@given(st.recursive(leaves, extend, max_leaves=12), st.floats(-10, 10), st.floats(-10, 10),
       st.floats(0, 20))
def test_evaluation_finite_or_located(text, x, y, t):
    e = parse_expression(text)
    try:
        value = e(t=t, x=x, y=y)
    except EvaluationError as exc:
        assert 0 <= exc.offset <= len(text.encode())
    else:
        assert np.isfinite(value)
