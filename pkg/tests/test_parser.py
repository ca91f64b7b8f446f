import pytest

from smalite.core import (
    Binary,
    Const,
    Last,
    Path,
    Ty,
    Unary,
    Var,
    double_value,
    dump_core,
    int_value,
    str_value,
)
from smalite.parser import (
    ParseError,
    SAssignment,
    SBinding,
    SComponent,
    SCondLhs,
    SPathLhs,
    SProperty,
    SSpike,
    parse,
    parse_core,
    tokenize,
)

from conftest import data


def parse_expr(text: str):
    """Parse an expression by embedding it as a property initializer."""
    tree = parse("Component root { Int v %s; }" % text)
    (prop,) = tree.children
    assert isinstance(prop, SProperty)
    return prop.init


class TestTokenizer:
    def test_comments_and_whitespace_ignored(self):
        toks = tokenize("a // comment\n b")
        assert [t.text for t in toks if t.kind != "eof"] == ["a", "b"]

    def test_string_escapes(self):
        toks = tokenize(r'"a\"b\n\t\\"')
        assert toks[0].kind == "string"
        assert toks[0].text == 'a"b\n\t\\'

    def test_unterminated_string(self):
        with pytest.raises(ParseError):
            tokenize('"abc')

    def test_numbers(self):
        kinds = [t.kind for t in tokenize("1 2.5 3e2 7")][:-1]
        assert kinds == ["int", "float", "float", "int"]

    def test_error_carries_position(self):
        with pytest.raises(ParseError) as e:
            tokenize("a\n  $")
        assert e.value.line == 2


class TestExpressions:
    def test_precedence_arith_over_compare(self):
        e = parse_expr("1 + 2 * 3 == 7")
        assert e == Binary(
            "==",
            Binary("+", Const(int_value(1)), Binary("*", Const(int_value(2)), Const(int_value(3)))),
            Const(int_value(7)),
        )

    def test_precedence_and_over_or(self):
        e = parse_expr("true || false && false")
        assert e.op == "||"
        assert e.right.op == "&&"

    def test_left_associativity(self):
        e = parse_expr("10 - 4 - 3")
        assert e == Binary(
            "-", Binary("-", Const(int_value(10)), Const(int_value(4))), Const(int_value(3))
        )

    def test_parens_override(self):
        e = parse_expr("(1 + 2) * 3")
        assert e.op == "*"
        assert e.left.op == "+"

    def test_negative_literal_folding(self):
        assert parse_expr("-5") == Const(int_value(-5))
        assert parse_expr("-2.5") == Const(double_value(-2.5))
        assert isinstance(parse_expr("-v"), Unary)

    def test_last_and_str(self):
        assert parse_expr("last c") == Last(Path.parse("c"))
        assert parse_expr("str(1)") == Unary("str", Const(int_value(1)))

    def test_string_literal(self):
        assert parse_expr('"hi"') == Const(str_value("hi"))

    def test_dotted_path_var(self):
        assert parse_expr("a.b.c") == Var(Path.parse("a.b.c"))


class TestItems:
    def test_property_kinds(self):
        tree = parse(
            'Component root { Int i 1; Double d 0.5; Bool b true; Str s "x"; }'
        )
        tys = [(c.name, c.ty) for c in tree.children]
        assert tys == [("i", Ty.INT), ("d", Ty.DOUBLE), ("b", Ty.BOOL), ("s", Ty.STR)]

    def test_spike_and_assignment(self):
        tree = parse("Component root { Int y 0; Spike s; a: 1 =: y; }")
        _, spike, assign = tree.children
        assert isinstance(spike, SSpike) and spike.name == "s"
        assert isinstance(assign, SAssignment)
        assert assign.name == "a" and str(assign.target) == "y"

    def test_binding_forms(self):
        tree = parse(
            """Component root {
              Spike s; Spike t;
              Component z {};
              s -> t;
              s !-> z;
              s ->! z;
              (1 < 2) -> t;
              b: s -> t;
            }"""
        )
        bindings = [c for c in tree.children if isinstance(c, SBinding)]
        assert len(bindings) == 5
        plain, deact_lhs, deact_rhs, cond, named = bindings
        assert isinstance(plain.lhs, SPathLhs) and not plain.lhs.deact
        assert deact_lhs.lhs.deact and not deact_lhs.rhs.deact
        assert not deact_rhs.lhs.deact and deact_rhs.rhs.deact
        assert isinstance(cond.lhs, SCondLhs)
        assert named.name == "b"

    def test_anonymous_component_name(self):
        tree = parse("Component root { Component _ {}; }")
        (child,) = tree.children
        assert isinstance(child, SComponent) and child.name is None

    def test_initial_activation_marker(self):
        tree = parse("Component root { Component<d> z {}; Component<a> w {}; }")
        z, w = tree.children
        assert z.ia.name == "INACTIVE" and w.ia.name == "ACTIVE"

    def test_graphical_kind_with_args(self):
        tree = parse('Component root { Frame f ("t", 10, 20) {}; }')
        (f,) = tree.children
        assert f.kind == "Frame" and len(f.args) == 3

    def test_program_must_be_component(self):
        with pytest.raises(ParseError):
            parse("Int x 1;")

    def test_trailing_input_rejected(self):
        with pytest.raises(ParseError):
            parse("Component root {} Component extra {}")

    def test_missing_semicolon(self):
        with pytest.raises(ParseError):
            parse("Component root { Int x 1 Int y 2; }")


class TestCoreRoundTrip:
    def test_counter_core_round_trips(self, counter):
        text = dump_core(counter)
        again = parse_core(text)
        assert dump_core(again) == text
        assert again == counter

    def test_small_core_round_trip(self):
        from smalite import elaborate

        p = elaborate(data("conflict.smala"))
        assert parse_core(dump_core(p)) == p
