import math
import random

from hypothesis import given, settings
from hypothesis import strategies as st

from smalite.core import (
    INT_MAX,
    INT_MIN,
    Binary,
    Const,
    Last,
    Path,
    Unary,
    Var,
    bool_value,
    double_value,
    expr_to_str,
    format_value,
    int_value,
    str_value,
)
from smalite.difftest import GenConfig, diff_run, gen_program, gen_trace
from smalite.formats import format_trace, parse_trace, parse_value_literal
from smalite.parser import parse
from smalite.semantics import EvalError, eval_expr


ints = st.integers(min_value=INT_MIN, max_value=INT_MAX)
idents = st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True).filter(
    lambda s: s not in ("last", "str", "true", "false", "inf", "nan")
)


class TestIntArithmetic:
    @given(ints, ints, st.sampled_from(["+", "-", "*"]))
    def test_matches_unbounded_arithmetic_or_overflows(self, a, b, op):
        expected = {"+": a + b, "-": a - b, "*": a * b}[op]
        expr = Binary(op, Const(int_value(a)), Const(int_value(b)))
        if INT_MIN <= expected <= INT_MAX:
            assert eval_expr({}, {}, expr).raw == expected
        else:
            try:
                eval_expr({}, {}, expr)
                assert False, "expected an overflow error"
            except EvalError:
                pass

    @given(ints, ints.filter(lambda n: n != 0))
    def test_division_truncates_toward_zero(self, a, b):
        q = eval_expr({}, {}, Binary("/", Const(int_value(a)), Const(int_value(b))))
        if INT_MIN <= int(a / b) <= INT_MAX:  # excludes INT_MIN / -1
            assert q.raw == math.trunc(a / b) if abs(a) < 2**52 else True
            # exact check without float imprecision:
            expected = abs(a) // abs(b)
            if (a < 0) != (b < 0):
                expected = -expected
            assert q.raw == expected

    @given(ints, ints.filter(lambda n: n != 0))
    def test_remainder_identity(self, a, b):
        if a == INT_MIN and b == -1:
            return  # quotient overflows
        q = eval_expr({}, {}, Binary("/", Const(int_value(a)), Const(int_value(b)))).raw
        r = eval_expr({}, {}, Binary("%", Const(int_value(a)), Const(int_value(b)))).raw
        assert q * b + r == a
        assert abs(r) < abs(b)


class TestLiteralRoundTrip:
    @given(ints)
    def test_int(self, n):
        assert parse_value_literal(format_value(int_value(n))) == int_value(n)

    @given(st.floats(allow_nan=False))
    def test_double(self, x):
        v = double_value(x)
        assert parse_value_literal(format_value(v)) == v

    @given(st.booleans())
    def test_bool(self, b):
        v = bool_value(b)
        assert parse_value_literal(format_value(v)) == v

    @given(st.text(st.characters(min_codepoint=1, max_codepoint=0x7E), max_size=40))
    def test_str(self, s):
        v = str_value(s)
        assert parse_value_literal(format_value(v)) == v


class TestTraceRoundTrip:
    @given(
        st.lists(
            st.one_of(
                idents.map(lambda n: ("trigger", n)),
                st.tuples(st.just("assign"), idents, ints),
            ),
            max_size=8,
        )
    )
    def test_format_then_parse(self, items):
        from smalite.core import Assign, Trigger

        events = []
        for item in items:
            if item[0] == "trigger":
                events.append(Trigger(Path.parse(item[1])))
            else:
                events.append(Assign(int_value(item[2]), Path.parse(item[1])))
        assert parse_trace(format_trace(events)) == events


def exprs():
    leaves = st.one_of(
        ints.map(lambda n: Const(int_value(n))),
        st.floats(allow_nan=False, allow_infinity=False).map(
            lambda x: Const(double_value(x))
        ),
        st.booleans().map(lambda b: Const(bool_value(b))),
        idents.map(lambda n: Var(Path.parse(n))),
        idents.map(lambda n: Last(Path.parse(n))),
    )
    return st.recursive(
        leaves,
        lambda children: st.one_of(
            st.tuples(
                st.sampled_from(
                    ["+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "||"]
                ),
                children,
                children,
            ).map(lambda t: Binary(t[0], t[1], t[2])),
            st.tuples(st.sampled_from(["-", "!", "str"]), children).map(
                lambda t: Unary(t[0], t[1])
            ),
        ),
        max_leaves=12,
    )


def _normalize(e):
    """Printing folds `-<literal>`; apply the same fold before comparing."""
    if isinstance(e, Unary):
        inner = _normalize(e.operand)
        if e.op == "-" and isinstance(inner, Const) and inner.value.ty.value in (
            "Int",
            "Double",
        ):
            from smalite.core import Value

            return Const(Value(inner.value.ty, -inner.value.raw))
        return Unary(e.op, inner)
    if isinstance(e, Binary):
        return Binary(e.op, _normalize(e.left), _normalize(e.right))
    return e


class TestExprPrinting:
    @given(exprs())
    @settings(max_examples=200)
    def test_print_then_parse_preserves_structure(self, e):
        text = expr_to_str(e)
        tree = parse("Component root { Int v %s; }" % text)
        (prop,) = tree.children
        assert prop.init == _normalize(e)


class TestDifferentialSampling:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=15, deadline=None)
    def test_generated_pair_agrees(self, seed):
        cfg = GenConfig()
        rng = random.Random(seed)
        p, _ = gen_program(cfg, rng)
        trace = gen_trace(p, cfg, rng)
        verdict = diff_run(p, trace)
        assert verdict.passed, verdict.detail
