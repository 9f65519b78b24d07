"""
Tests for the iterate-function DSL: parsing, printing, evaluation,
symbolic derivatives and numeric inversion.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergodic_lab.errors import (
    ExprDomainError,
    ExprSyntaxError,
    InverseError,
    NoBracketError,
    UnknownIdentifierError,
)
from ergodic_lab.expr import (
    Add,
    Call,
    DOMAIN_CANDIDATES,
    Const,
    Div,
    Mul,
    Pow,
    X,
    FunctionSpec,
    RealFunction,
    differentiate,
    evaluate,
    evaluate_mp,
    inverse_eval,
    parse,
    detect_domain_start,
    to_text,
)

pytestmark = pytest.mark.unit


CATALOG_TEXTS = [
    "x^(1/2)",
    "x^(1/3)*log(x)",
    "x^0.9",
    "log(x)^2",
    "log(x)*log(log(x))",
    "x^0.04*(4/0.04+sin(log(x)))^3",
    "3*x+1",
    "x/log(x)",
    "exp(sqrt(log(x)))",
    "-x^2",
    "2^-x",
    "cos(pi*x)/e",
]


# ============================================================================
# Parsing and printing
# ============================================================================

def test_power_binds_tighter_than_unary_minus():
    assert parse("-x^2") == Mul(Const(-1.0), Pow(X, Const(2.0)))


def test_power_is_right_associative():
    assert parse("x^0.5^2") == Pow(X, Pow(Const(0.5), Const(2.0)))


@pytest.mark.parametrize("text,exponent", [
    ("x^(6/3)", 2.0),
    ("x^2^3", 8.0),
    ("x^-(1+1)", -2.0),
])
def test_whole_valued_exponent_folds_at_parse_time(text, exponent):
    assert parse(text) == Pow(X, Const(exponent))


def test_fractional_or_named_exponent_is_kept():
    assert parse("x^(1/2)") == Pow(X, Div(Const(1.0), Const(2.0)))
    assert parse("x^(2*k)", {"k": 1.0}).right == Mul(Const(2.0), Const(1.0, "k"))


def test_negative_literal_folds():
    assert parse("-2") == Const(-2.0)
    assert parse("x^-1") == Pow(X, Const(-1.0))


def test_named_constants_print_by_name():
    tree = parse("pi*x+e")
    assert to_text(tree) == "pi * x + e"
    assert tree == Add(Mul(Const(math.pi, "pi"), X), Const(math.e, "e"))


@pytest.mark.parametrize("text", CATALOG_TEXTS)
def test_print_parse_roundtrip(text):
    tree = parse(text)
    assert parse(to_text(tree)) == tree


def test_unknown_identifier_reports_offset():
    with pytest.raises(UnknownIdentifierError) as excinfo:
        parse("x + tan(x)")
    assert excinfo.value.offset == 4


@pytest.mark.parametrize("text", ["", "x +", "(x", "x)", "2 ** x", "x $ 1"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse(text)


def test_offsets_are_bytes():
    # U+00A0 is whitespace to the tokenizer and two bytes in UTF-8
    with pytest.raises(ExprSyntaxError) as excinfo:
        parse("x\u00a0+ $")
    assert excinfo.value.offset == 5


# ============================================================================
# Evaluation
# ============================================================================

def test_evaluate_scalar_and_array():
    tree = parse("x^2 + 1")
    assert evaluate(tree, 3.0) == 10.0
    np.testing.assert_array_equal(evaluate(tree, np.array([0.0, 1.0, 2.0])), [1.0, 2.0, 5.0])


@pytest.mark.parametrize("text,x", [
    ("log(x)", 0.0),
    ("sqrt(x)", -1.0),
    ("1/(x-1)", 1.0),
    ("x^0.5", -4.0),
])
def test_domain_errors(text, x):
    with pytest.raises(ExprDomainError):
        evaluate(parse(text), x)


def test_integer_power_of_negative_base_is_allowed():
    assert evaluate(parse("x^3"), -2.0) == -8.0


@pytest.mark.parametrize("text,expected", [
    ("x^(6/3)", 4.0),
    ("x^(1+2)", -8.0),
    ("x^-(1+1)", 0.25),
])
def test_whole_valued_exponent_expression_takes_negative_base(text, expected):
    assert evaluate(parse(text), -2.0) == pytest.approx(expected)
    assert float(evaluate_mp(parse(text), -2)) == pytest.approx(expected)


@pytest.mark.parametrize("text", ["x^(1/2)", "x^(pi/pi+0.5)"])
def test_fractional_exponent_expression_rejects_negative_base(text):
    with pytest.raises(ExprDomainError, match="non-integer power"):
        evaluate(parse(text), -2.0)


def test_evaluate_mp_reads_decimal_literals():
    import mpmath as mp

    with mp.workdps(30):
        value = evaluate_mp(parse("0.1*x"), mp.mpf(10))
        assert abs(value - 1) < mp.mpf(10) ** -28


def test_domain_start_detection():
    assert detect_domain_start(parse("x^0.5")) == 1.0
    assert detect_domain_start(parse("x/log(x)")) == pytest.approx(math.e)
    assert detect_domain_start(parse("log(x)*log(log(x))")) in DOMAIN_CANDIDATES[1:]


# ============================================================================
# Derivatives
# ============================================================================

def test_derivative_of_polynomial_is_folded():
    assert differentiate(parse("3*x+1")) == Const(3.0)


def test_derivative_of_log():
    assert differentiate(parse("log(x)")) == parse("1/x")


@pytest.mark.parametrize("text", CATALOG_TEXTS)
def test_three_derivatives_exist(text):
    spec = FunctionSpec.from_text(text)
    assert len(spec.derivatives) == 4
    x = spec.domain_start + 50.0
    for order in range(4):
        assert math.isfinite(spec.derivative(order, x))


@settings(max_examples=60, deadline=None)
@given(
    text=st.sampled_from(CATALOG_TEXTS[:8]),
    offset=st.floats(min_value=5.0, max_value=1e4),
    order=st.integers(min_value=1, max_value=3),
)
def test_derivative_matches_central_difference(text, offset, order):
    spec = FunctionSpec.from_text(text)
    x = spec.domain_start + offset
    h = 1e-3 * x
    lower = spec.derivative(order - 1, x - h)
    upper = spec.derivative(order - 1, x + h)
    numeric = (upper - lower) / (2.0 * h)
    exact = spec.derivative(order, x)
    scale = max(abs(exact), abs(spec.derivative(order - 1, x)) / x, 1e-12)
    assert abs(numeric - exact) <= 1e-4 * scale


def test_derivative_order_out_of_range():
    spec = FunctionSpec.from_text("x^2")
    with pytest.raises(ValueError):
        spec.derivative(4, 1.0)


def test_derivative_of_variable_exponent():
    d = differentiate(parse("x^x"))
    assert isinstance(d, Mul)
    assert evaluate(d, 1.0) == pytest.approx(1.0)
    assert isinstance(parse("exp(x)"), Call)


# ============================================================================
# Inversion
# ============================================================================

@settings(max_examples=40, deadline=None)
@given(y=st.floats(min_value=1.5, max_value=1e5))
def test_inverse_of_sqrt(y):
    spec = FunctionSpec.from_text("x^0.5")
    x = inverse_eval(spec, y)
    assert x == pytest.approx(y * y, rel=1e-9)


def test_inverse_of_decreasing_function():
    spec = FunctionSpec.from_text("1/x")
    assert spec.monotone_hint == "decreasing"
    assert inverse_eval(spec, 0.25) == pytest.approx(4.0, rel=1e-9)


def test_inverse_below_range_has_no_bracket():
    spec = FunctionSpec.from_text("x^0.5")
    with pytest.raises(NoBracketError):
        inverse_eval(spec, 0.5)


def test_inverse_above_search_bound_has_no_bracket():
    spec = FunctionSpec.from_text("log(x)")
    with pytest.raises(NoBracketError):
        inverse_eval(spec, 1e3)


class _StepUp(RealFunction):
    """x plus a unit jump at 5: increasing, but 5.5 is never attained."""

    name = "step"
    domain_start = 1.0
    monotone_hint = "increasing"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = x + (x >= 5.0)
        return float(out) if out.ndim == 0 else out

    def derivative(self, order, x):
        return np.ones_like(np.asarray(x, dtype=float)) if order == 1 else self.value(x)


def test_inverse_across_a_jump_reports_the_residual():
    with pytest.raises(InverseError, match=r"residual 0\.5"):
        inverse_eval(_StepUp(), 5.5)


def test_inverse_on_either_side_of_the_jump():
    assert inverse_eval(_StepUp(), 3.0) == pytest.approx(3.0, rel=1e-9)
    assert inverse_eval(_StepUp(), 7.0) == pytest.approx(6.0, rel=1e-9)
