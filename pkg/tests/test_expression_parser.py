"""Tests for expression_parser.py: parsing, printing and second-order jets."""
import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from errors import ExpressionDomainError, ExpressionSyntaxError, UnknownIdentifierError
from expression_parser import (
    Binary,
    Const,
    Power,
    Unary,
    Var,
    eval_jet2,
    evaluate,
    parse,
    to_source,
)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

class TestParse:
    def test_precedence_power_over_neg(self):
        assert parse("-u^2") == Unary("neg", Power(Var("u"), 2))

    def test_product_binds_tighter_than_sum(self):
        assert parse("u + v*2") == Binary("+", Var("u"), Binary("*", Var("v"), Const(2.0)))

    def test_left_associative(self):
        assert parse("u - v - 1") == Binary("-", Binary("-", Var("u"), Var("v")), Const(1.0))

    def test_pi_is_a_constant(self):
        assert parse("pi") == Const(math.pi)

    def test_function_call(self):
        assert parse("sin(u)") == Unary("sin", Var("u"))

    def test_negative_integer_exponent(self):
        assert parse("u^-2") == Power(Var("u"), -2)

    def test_scientific_number(self):
        assert parse("1e-3") == Const(1e-3)

    def test_offsets_point_into_source(self):
        expr = parse("u + sin(v)")
        assert expr.offset == 2
        assert expr.right.offset == 4


class TestParseErrors:
    def test_unknown_identifier_carries_offset(self):
        with pytest.raises(UnknownIdentifierError) as info:
            parse("u + tan(v)")
        assert info.value.offset == 4
        assert "offset 4" in str(info.value)

    def test_unbalanced_parenthesis(self):
        with pytest.raises(ExpressionSyntaxError) as info:
            parse("(u + v")
        assert info.value.offset == 6

    def test_non_integer_exponent(self):
        with pytest.raises(ExpressionSyntaxError):
            parse("u^0.5")

    def test_unexpected_character(self):
        with pytest.raises(ExpressionSyntaxError) as info:
            parse("u $ v")
        assert info.value.offset == 2

    def test_offsets_count_bytes(self):
        # leading no-break space is one character but two UTF-8 bytes
        with pytest.raises(UnknownIdentifierError) as info:
            parse("\u00a0u + w")
        assert info.value.offset == 6

    def test_empty_input(self):
        with pytest.raises(ExpressionSyntaxError):
            parse("   ")

    def test_errors_are_value_errors(self):
        with pytest.raises(ValueError):
            parse("u +")

    def test_literal_out_of_range(self):
        with pytest.raises(ExpressionSyntaxError) as info:
            parse("u + 1e999")
        assert info.value.offset == 4


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

class TestToSource:
    @pytest.mark.parametrize("text", [
        "u^2 - v^2", "2*u*v", "cos(u)/sqrt(2)", "-(u + v)^3", "exp(-u)*sin(pi*v)", "u^-1",
    ])
    def test_reparse_gives_same_tree(self, text):
        expr = parse(text)
        assert parse(to_source(expr)) == expr

    def test_large_literal_round_trips(self):
        expr = parse("1e300*u")
        assert parse(to_source(expr)) == expr

    def test_non_finite_constant_has_no_source(self):
        with pytest.raises(ValueError):
            to_source(Const(math.inf))


_leaves = st.one_of(
    st.sampled_from([Var("u"), Var("v")]),
    st.floats(min_value=0.0, max_value=100.0, allow_nan=False).map(Const),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*"), children, children).map(lambda t: Binary(*t)),
        st.tuples(st.sampled_from(["neg", "sin", "cos"]), children).map(lambda t: Unary(*t)),
        st.tuples(children, st.integers(min_value=0, max_value=3)).map(lambda t: Power(*t)),
    )


_trees = st.recursive(_leaves, _extend, max_leaves=8)
# bounded constants keep stencil rounding small next to the derivatives
_smooth_trees = st.recursive(
    st.one_of(
        st.sampled_from([Var("u"), Var("v")]),
        st.floats(min_value=0.0, max_value=2.0, allow_nan=False).map(Const),
    ),
    _extend,
    max_leaves=6,
)


class TestPrintParseProperty:
    @given(_trees)
    @settings(max_examples=200, deadline=None)
    def test_print_then_parse_is_identity(self, expr):
        assert parse(to_source(expr)) == expr


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------

def _fd_jet(expr, u, v, h=1e-4):
    f = lambda a, b: evaluate(expr, a, b)
    return (
        (f(u + h, v) - f(u - h, v)) / (2 * h),
        (f(u, v + h) - f(u, v - h)) / (2 * h),
        (f(u + h, v) - 2 * f(u, v) + f(u - h, v)) / h ** 2,
        (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4 * h ** 2),
        (f(u, v + h) - 2 * f(u, v) + f(u, v - h)) / h ** 2,
    )


class TestJets:
    def test_polynomial_exact(self):
        jet = eval_jet2(parse("u^2 - v^2 + 3*u*v"), 0.5, -0.25)
        assert jet.value == pytest.approx(0.25 - 0.0625 - 0.375)
        assert jet.gradient() == pytest.approx((1.0 - 0.75, 0.5 + 1.5))
        assert jet.hessian() == ((2.0, 3.0), (3.0, -2.0))

    def test_division_and_sqrt(self):
        jet = eval_jet2(parse("1/sqrt(u)"), 4.0, 0.0)
        assert jet.value == pytest.approx(0.5)
        assert jet.du == pytest.approx(-0.5 * 4.0 ** -1.5)
        assert jet.duu == pytest.approx(0.75 * 4.0 ** -2.5)

    def test_division_by_zero(self):
        with pytest.raises(ExpressionDomainError) as info:
            evaluate(parse("1/(u - v)"), 1.0, 1.0)
        assert info.value.offset == 1

    def test_sqrt_of_negative(self):
        with pytest.raises(ExpressionDomainError):
            eval_jet2(parse("sqrt(u)"), -1.0, 0.0)

    def test_negative_power_at_zero(self):
        with pytest.raises(ExpressionDomainError):
            eval_jet2(parse("u^-2"), 0.0, 1.0)

    def test_exp_overflow(self):
        with pytest.raises(ExpressionDomainError) as info:
            evaluate(parse("2*exp(u)"), 1000.0, 0.0)
        assert info.value.offset == 2

    def test_power_overflow(self):
        with pytest.raises(ExpressionDomainError) as info:
            eval_jet2(parse("u^3"), 1e200, 0.0)
        assert info.value.offset == 1

    def test_quotient_out_of_range(self):
        with pytest.raises(ExpressionDomainError) as info:
            eval_jet2(parse("1/u"), 1e-200, 0.0)
        assert info.value.offset == 1

    @given(
        st.sampled_from([
            "sin(u)*cos(v)", "exp(u*v)", "(u + 2)^-1", "sqrt(u^2 + v^2 + 1)",
            "cos(u)/sqrt(2)", "u^3*v - v^2/(1 + u^2)", "sin(exp(u) - v)",
        ]),
        st.floats(min_value=-1.0, max_value=1.0),
        st.floats(min_value=-1.0, max_value=1.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_jets_match_finite_differences(self, text, u, v):
        expr = parse(text)
        jet = eval_jet2(expr, u, v)
        fd = _fd_jet(expr, u, v)
        exact = (jet.du, jet.dv, jet.duu, jet.duv, jet.dvv)
        for a, b in zip(exact, fd):
            assert a == pytest.approx(b, abs=1e-5, rel=1e-5)

    @given(_smooth_trees, st.floats(min_value=-1.0, max_value=1.0), st.floats(min_value=-1.0, max_value=1.0))
    @settings(max_examples=100, deadline=None)
    def test_random_tree_jets_match_finite_differences(self, expr, u, v):
        h = 1e-4
        try:
            jet = eval_jet2(expr, u, v)
            fd = _fd_jet(expr, u, v, h)
            scale = max(abs(evaluate(expr, u + a, v + b)) for a in (-h, 0.0, h) for b in (-h, 0.0, h))
        except ExpressionDomainError:
            assume(False)
        assume(math.isfinite(scale))
        exact = (jet.du, jet.dv, jet.duu, jet.duv, jet.dvv)
        for a, b in zip(exact, fd):
            assert a == pytest.approx(b, abs=1e-5 * (1.0 + scale), rel=1e-4)
