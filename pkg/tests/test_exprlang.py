import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fmorph.errors import UnbalancedParen, UnboundVariable, UnexpectedToken, UnknownFunction
from fmorph.exprlang import (
    BinOp, Call, Const, Neg, Num, Var, differentiate, free_vars, is_polynomial, node_count, parse,
    substitute, to_source,
)
from fmorph.jet import eval_real

from oracles import expr_fun, fd_grad

NAMES = ("x", "y", "z", "x1", "w_2")

leaves = st.one_of(
    st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num),
    st.sampled_from(NAMES).map(Var),
    st.just(Const("pi")),
)


def _extend(children):
    unary = st.sampled_from(["sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh"])
    binary = st.sampled_from(["atan2", "pow", "min", "max"])
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(unary, children).map(lambda t: Call(t[0], (t[1],))),
        st.tuples(binary, children, children).map(lambda t: Call(t[0], (t[1], t[2]))),
    )


ast = st.recursive(leaves, _extend, max_leaves=25)


@pytest.mark.parametrize("src, expected", [
    ("x^2 + y", BinOp("+", BinOp("^", Var("x"), Num(2.0)), Var("y"))),
    ("x ^ 2 ^ 3", BinOp("^", Var("x"), BinOp("^", Num(2.0), Num(3.0)))),
    ("-x^2", Neg(BinOp("^", Var("x"), Num(2.0)))),
    ("a - b - c", BinOp("-", BinOp("-", Var("a"), Var("b")), Var("c"))),
    ("2*-x", BinOp("*", Num(2.0), Neg(Var("x")))),
    ("1.5e-3", Num(1.5e-3)),
    (".5", Num(0.5)),
    ("pi", Const("pi")),
    ("atan2(y, x)", Call("atan2", (Var("y"), Var("x")))),
])
def test_parse_shapes(src, expected):
    assert parse(src) == expected


def test_hopf_weight_parses():
    e = parse("2/(1+x1^2+x2^2+x3^2)")
    assert free_vars(e) == {"x1", "x2", "x3"}
    assert eval_real(e, {"x1": 1.0, "x2": 0.0, "x3": 1.0}) == pytest.approx(2 / 3)


@pytest.mark.parametrize("src, env, value", [
    ("x ^ 2 ^ 3", {"x": 2.0}, 256.0),
    ("pi", {}, 3.141592653589793),
    ("sqrt(y^2+z^2)", {"y": 3.0, "z": 4.0}, 5.0),
    ("abs(-2)^3", {}, 8.0),
    ("-2^2", {}, -4.0),
    ("min(x, 3) + max(x, 3)", {"x": 1.0}, 4.0),
    ("pow(2, 10)", {}, 1024.0),
])
def test_eval_real_values(src, env, value):
    assert eval_real(parse(src), env) == value


@pytest.mark.parametrize("src, exc, offset", [
    ("foo(x)", UnknownFunction, 0),
    ("x + bar(1)", UnknownFunction, 4),
    ("(x + 1", UnbalancedParen, 0),
    ("x + 1)", UnbalancedParen, 5),
    ("sin((x)", UnbalancedParen, 3),
    ("x + * y", UnexpectedToken, 4),
    ("x $ y", UnexpectedToken, 2),
    ("", UnexpectedToken, 0),
    ("atan2(x)", UnexpectedToken, 0),
    ("é + $", UnexpectedToken, 0),
])
def test_parse_errors_carry_offsets(src, exc, offset):
    with pytest.raises(exc) as info:
        parse(src)
    assert info.value.offset == offset


def test_offsets_are_bytes():
    with pytest.raises(UnexpectedToken) as info:
        parse("é$")
    assert info.value.offset == 0  # 'é' itself is not a valid token
    with pytest.raises(UnexpectedToken) as info:
        parse("x + é")
    assert info.value.offset == 4


def test_unbound_variable():
    with pytest.raises(UnboundVariable) as info:
        eval_real(parse("x + q"), {"x": 1.0})
    assert info.value.name == "q"


@given(ast)
def test_print_parse_fixpoint(e):
    once = parse(to_source(e))
    assert parse(to_source(once)) == once


@given(ast)
def test_print_parse_preserves_non_negative_literals(e):
    # every literal in the generator is non-negative, so one round trip is exact
    assert parse(to_source(e)) == e


def test_printer_minimal_parentheses():
    assert to_source(parse("(a + b) * c")) == "(a + b)*c"
    assert to_source(parse("a + (b * c)")) == "a + b*c"
    assert to_source(parse("(x^2)^3")) == "(x^2)^3"
    assert to_source(parse("a - (b - c)")) == "a - (b - c)"


def test_substitute_and_counts():
    e = parse("x*y + sin(x)")
    s = substitute(e, {"x": "t^2"})
    assert free_vars(s) == {"t", "y"}
    assert eval_real(s, {"t": 2.0, "y": 1.0}) == pytest.approx(4 + math.sin(4))
    assert node_count(parse("x + x")) == 3


@pytest.mark.parametrize("src", [
    "x^3*y - 2*x*y^2", "sin(x*y)", "exp(x)/(1+y^2)", "atan2(y, 1 + x^2)", "log(1 + x^2)*cos(y)",
    "sqrt(2 + x)", "tanh(x - y)^2", "pow(1 + x^2, 0.5)",
])
def test_symbolic_derivative_matches_fd(src):
    e = parse(src)
    x = np.array([0.3, -0.7])
    grad = [eval_real(differentiate(e, v), {"x": x[0], "y": x[1]}) for v in "xy"]
    assert np.allclose(grad, fd_grad(expr_fun(e, "xy"), x), atol=1e-8)


@pytest.mark.parametrize("src, poly", [
    ("x^2 - y^2", True), ("3*x*y + 1", True), ("x/2", True), ("x/y", False), ("sin(x)", False),
    ("x^0.5", False),
])
def test_is_polynomial(src, poly):
    assert is_polynomial(parse(src)) is poly
