import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from h3surf import jet
from h3surf.expr import (
    BinOp,
    Call,
    ExprDomainError,
    ExprSyntaxError,
    Neg,
    Num,
    Var,
    eval_jet2,
    evaluate,
    free_variables,
    parse,
    profile,
    to_text,
)
from h3surf.jet import Jet2, JetDomainError


def test_parse_examples():
    assert parse("t") == Var("t")
    assert parse("sqrt(4 - t^2)") == Call("sqrt", BinOp("-", Num(4.0), BinOp("^", Var("t"), Num(2.0))))
    assert parse("x*y/2") == BinOp("/", BinOp("*", Var("x"), Var("y")), Num(2.0))


def test_precedence():
    assert parse("-t^2") == Neg(BinOp("^", Var("t"), Num(2.0)))
    assert parse("2^3^2") == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    assert evaluate(parse("2^3^2")) == 512.0
    assert evaluate(parse("1 - 2 - 3")) == -4.0
    assert evaluate(parse("8 / 4 / 2")) == 1.0
    assert evaluate(parse("-t^2"), t=3.0) == -9.0
    assert evaluate(parse("2*-t"), t=3.0) == -6.0
    assert evaluate(parse("1.5e-1 + .5"), ) == pytest.approx(0.65)


@pytest.mark.parametrize(
    "src",
    ["", "   ", "t +", "(t", "t)", "foo(t)", "q", "sqrt t", "2 ** 3", "t $ 1", "sin()"],
)
def test_syntax_errors(src):
    with pytest.raises(ExprSyntaxError) as info:
        parse(src)
    assert "position" in str(info.value)


def test_error_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse("t + zz")
    assert info.value.pos == 4


def test_free_variables():
    assert free_variables(parse("sqrt(c - t^2) + x*0")) == {"c", "t", "x"}


def test_jet_examples():
    j = profile(parse("t^2"), 3.0)
    assert (j.value, j.d(0), j.dd(0, 0)) == (9.0, 6.0, 2.0)
    j = profile(parse("sqrt(4-t^2)"), 1.0)
    assert j.value == pytest.approx(math.sqrt(3))
    assert j.d(0) == pytest.approx(-1 / math.sqrt(3))
    assert j.dd(0, 0) == pytest.approx(-4 / (3 * math.sqrt(3)))
    j = eval_jet2(parse("x*y/2"), {"x": Jet2.seed(1.0, 0, 2), "y": Jet2.seed(2.0, 1, 2)})
    assert j.value == 1.0
    assert np.allclose(j.grad, [1.0, 0.5])
    assert np.allclose(j.hess, [[0, 0.5], [0.5, 0]])


def test_cylinder_profile_against_fd():
    e, h, t = parse("sqrt(4-t^2)"), 1e-5, 1.0
    f = lambda s: evaluate(e, t=s)
    j = profile(e, t)
    assert j.d(0) == pytest.approx((f(t + h) - f(t - h)) / (2 * h), rel=1e-8)
    assert j.dd(0, 0) == pytest.approx((f(t + h) - 2 * f(t) + f(t - h)) / h**2, rel=1e-4)


@pytest.mark.parametrize(
    "src,t",
    [("sqrt(t)", -1.0), ("log(t)", 0.0), ("1/t", 0.0), ("t^0.5", -2.0), ("1/(t - 1)", 1.0)],
)
def test_domain_errors_name_subexpression(src, t):
    with pytest.raises(ExprDomainError) as info:
        profile(parse(src), t)
    assert isinstance(info.value, JetDomainError)
    assert info.value.node is not None


def test_constant_parameter():
    e = parse("sqrt(c - t^2)")
    assert profile(e, 0.0, {"c": 9.0}).value == 3.0
    with pytest.raises(KeyError):
        profile(e, 0.0)


def test_integer_power_is_exact():
    j = profile(parse("t^-2"), 2.0)
    assert (j.value, j.d(0), j.dd(0, 0)) == (0.25, -0.25, 0.375)
    assert profile(parse("t^3"), -2.0).value == -8.0  # negative base fine for integers


def test_real_power_and_abs():
    j = profile(parse("t^1.5"), 4.0)
    assert j.value == pytest.approx(8.0)
    assert j.d(0) == pytest.approx(3.0)
    assert j.dd(0, 0) == pytest.approx(0.375)
    assert profile(parse("abs(t)"), -2.0).d(0) == -1.0


def test_vectorised_evaluation():
    t = np.linspace(-1, 1, 7)
    j = profile(parse("sin(t)*t"), t)
    assert j.value.shape == (7,) and j.grad.shape == (7, 1) and j.hess.shape == (7, 1, 1)
    assert np.allclose(j.d(0), np.sin(t) + t * np.cos(t))


# ---------------------------------------------------------------- random expressions

_safe_unary = {
    "sin": "sin({})",
    "cos": "cos({})",
    "atan": "atan({})",
    "exp": "exp(sin({}))",
    "sqrt": "sqrt(1 + ({})^2)",
    "log": "log(2 + cos({}))",
    "recip": "1/(1.5 + sin({}))",
}


def _exprs(vars_):
    leaf = st.one_of(
        st.sampled_from(vars_),
        st.integers(-3, 3).map(str),
        st.sampled_from(["0.5", "1.25", "2"]),
    )

    def extend(children):
        unary = st.tuples(st.sampled_from(sorted(_safe_unary)), children).map(
            lambda p: _safe_unary[p[0]].format(p[1])
        )
        binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(
            lambda p: f"({p[0]} {p[1]} {p[2]})"
        )
        power = st.tuples(children, st.integers(0, 3)).map(lambda p: f"({p[0]})^{p[1]}")
        neg = children.map(lambda s: f"-({s})")
        return st.one_of(unary, binary, power, neg)

    return st.recursive(leaf, extend, max_leaves=6)


def _close(a, b, rel):
    return abs(a - b) <= rel * max(1.0, abs(b))


@given(_exprs(["x", "y"]), st.floats(-1, 1), st.floats(-1, 1))
def test_jet_matches_finite_differences(src, x, y):
    e = parse(src)
    h = 1e-5

    def jet_at(px, py):
        return eval_jet2(e, {"x": Jet2.seed(px, 0, 2), "y": Jet2.seed(py, 1, 2)})

    j = jet_at(x, y)
    val = lambda px, py: float(jet_at(px, py).value)
    gx = (val(x + h, y) - val(x - h, y)) / (2 * h)
    gy = (val(x, y + h) - val(x, y - h)) / (2 * h)
    assert _close(float(j.d(0)), gx, 1e-6)
    assert _close(float(j.d(1)), gy, 1e-6)
    # second derivatives from central differences of the value, h = 1e-5
    hxx = (val(x + h, y) - 2 * val(x, y) + val(x - h, y)) / h**2
    hyy = (val(x, y + h) - 2 * val(x, y) + val(x, y - h)) / h**2
    hxy = (val(x + h, y + h) - val(x + h, y - h) - val(x - h, y + h) + val(x - h, y - h)) / (4 * h * h)
    scale = max(1.0, abs(float(j.value)))
    assert _close(float(j.dd(0, 0)), hxx, 1e-4 * scale)
    assert _close(float(j.dd(1, 1)), hyy, 1e-4 * scale)
    assert _close(float(j.dd(0, 1)), hxy, 1e-4 * scale)


@given(_exprs(["x", "y"]), st.floats(-1, 1), st.floats(-1, 1))
def test_hessian_symmetric_and_deterministic(src, x, y):
    e = parse(src)
    env = {"x": Jet2.seed(x, 0, 2), "y": Jet2.seed(y, 1, 2)}
    j1, j2 = eval_jet2(e, env), eval_jet2(e, env)
    assert np.array_equal(j1.hess, np.swapaxes(j1.hess, -1, -2))
    assert np.array_equal(j1.value, j2.value) and np.array_equal(j1.hess, j2.hess)


@given(_exprs(["t", "s", "x", "y", "c"]))
def test_round_trip(src):
    e = parse(src)
    assert parse(to_text(e)) == e


@given(_exprs(["t"]), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_compose_chain_rule(src, a, b, t0):
    # g(t) with t = a u + b v^2: compose() against direct evaluation
    e = parse(src)
    u, v = Jet2.seed(t0, 0, 2), Jet2.seed(0.5, 1, 2)
    inner = u * a + v * v * b
    direct = eval_jet2(e, {"t": inner})
    outer = profile(e, inner.value)
    via = outer.compose([inner])
    assert np.allclose(via.value, direct.value)
    assert np.allclose(via.grad, direct.grad, atol=1e-10)
    assert np.allclose(via.hess, direct.hess, atol=1e-9)


def test_jet_functions_table():
    assert set(jet.FUNCTIONS) == {"sqrt", "sin", "cos", "tan", "exp", "log", "atan", "abs"}
