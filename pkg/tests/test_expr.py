from __future__ import annotations


import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afmc.expr import ExprNameError, ExprSyntaxError, lipschitz_probe, parse_coefficient_expr


@pytest.mark.parametrize("text, x, value", [
    ("-x", 3.0, -3.0),
    ("exp(-x^2/2)", 0.0, 1.0),
    ("2*x + sin(x)", 0.0, 0.0),
    ("2+3*4", 0.0, 14.0),
    ("-x^2", 3.0, -9.0),
    ("2^-1", 0.0, 0.5),
    ("2^3^2", 0.0, 512.0),
    ("abs(x) - sign(x)", -2.0, 3.0),
    ("(1+x)*(1-x)", 0.5, 0.75),
    ("cos(0)+1e-1", 0.0, 1.1),
])
def test_evaluate(text, x, value):
    assert parse_coefficient_expr(text)(x) == pytest.approx(value, abs=1e-15)


def test_vectorized_and_constant_broadcast():
    xs = np.linspace(-1, 1, 5)
    assert np.allclose(parse_coefficient_expr("-x")(xs), -xs)
    out = parse_coefficient_expr("1")(xs)
    assert out.shape == xs.shape and np.all(out == 1.0)
    assert parse_coefficient_expr("2*3").constant() == 6.0
    assert parse_coefficient_expr("x-x").constant() is None


def test_errors_carry_offsets():
    with pytest.raises(ExprSyntaxError) as e:
        parse_coefficient_expr("1 + * 2")
    assert e.value.offset == 4
    with pytest.raises(ExprNameError) as e:
        parse_coefficient_expr("2*tan(x)")
    assert e.value.offset == 2
    with pytest.raises(ExprSyntaxError):
        parse_coefficient_expr("(x")
    with pytest.raises(ExprSyntaxError):
        parse_coefficient_expr("   ")
    with pytest.raises(ExprSyntaxError):
        parse_coefficient_expr("x y")


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        parse_coefficient_expr("1/x")(0.0)
    assert parse_coefficient_expr("1/x")(2.0) == 0.5


def test_lipschitz_probe():
    assert lipschitz_probe(parse_coefficient_expr("-x")) == pytest.approx(1.0)
    assert lipschitz_probe(parse_coefficient_expr("sin(3*x)"), -1, 1) == pytest.approx(3.0, rel=1e-3)


_leaf = st.one_of(st.just("x"), st.integers(0, 9).map(str), st.sampled_from(["0.5", "2.25", "1e-3"]))


def _expr():
    return st.recursive(
        _leaf,
        lambda c: st.one_of(
            st.tuples(c, st.sampled_from("+-*"), c).map(lambda t: f"{t[0]}{t[1]}{t[2]}"),
            st.tuples(c, c).map(lambda t: f"({t[0]})^({t[1]})"),
            c.map(lambda e: f"-{e}"),
            c.map(lambda e: f"({e})"),
            st.tuples(st.sampled_from(["exp", "sin", "cos", "abs", "sign"]), c).map(lambda t: f"{t[0]}({t[1]})"),
        ),
        max_leaves=8,
    )


@settings(max_examples=200, deadline=None)
@given(text=_expr(), x=st.floats(-2, 2))
def test_parse_print_parse_idempotent(text, x):
    e1 = parse_coefficient_expr(text)
    printed = str(e1)
    e2 = parse_coefficient_expr(printed)
    assert e2.tree == e1.tree
    assert str(e2) == printed
    with np.errstate(all="ignore"):
        v1, v2 = e1(x), e2(x)
    assert (np.isnan(v1) and np.isnan(v2)) or v1 == v2
