import pytest

from smalite import elaborate
from smalite.analysis import (
    Diagnostic,
    Edge,
    PropGraph,
    Vertex,
    build_prop_graph,
    check_activation_conflicts,
    check_all,
    check_cycles,
    check_dead_parent_assign,
    check_rssa,
    check_unreachable,
    conditions_disjoint,
    fold_expr,
    has_errors,
    prune_constant_conditions,
    strongly_connected_components,
    topo_order,
)
from smalite.core import Binary, Const, Path, Var, bool_value, int_value
from smalite.parser import parse

from conftest import data

P = Path.parse


def graph_of(src: str) -> PropGraph:
    return build_prop_graph(elaborate(src))


def codes(diags) -> list[str]:
    return sorted(d.code for d in diags)


class TestGraphConstruction:
    def test_spike_chain_edges(self):
        g = graph_of("Component root { Spike s; Spike t; s -> t; }")
        flow = {(e.src, e.dst) for e in g.edges if e.flow}
        b = Vertex("binding", P("root._g0"))
        assert (Vertex("ext-trigger", P("root.s")), Vertex("trigger", P("root.s"))) in flow
        assert (Vertex("trigger", P("root.s")), b) in flow
        assert (b, Vertex("trigger", P("root.t"))) in flow

    def test_assignment_drives_change_and_cond_listeners(self):
        g = graph_of(
            """Component root {
              Int y 0; Spike hit; Spike hit2;
              a: 1 =: y;
              y -> hit;
              (y > 0) -> hit2;
            }"""
        )
        flow = {(e.src, e.dst) for e in g.edges if e.flow}
        trig_a = Vertex("trigger", P("root.a"))
        assert (trig_a, Vertex("binding", P("root._g0"))) in flow
        assert (trig_a, Vertex("binding", P("root._g1"))) in flow

    def test_external_assign_is_a_source(self):
        g = graph_of("Component root { Int y 0; Spike hit; y -> hit; }")
        assert Vertex("ext-assign", P("root.y")) in g.ext_sources

    def test_activation_closure_edges_follow_markers(self):
        g = graph_of(
            """Component root {
              Spike go;
              Component<d> z { Component inner {}; Component<d> off {}; };
              go -> z;
            }"""
        )
        flow = {(e.src, e.dst) for e in g.edges if e.flow}
        act = lambda q: Vertex("activate", P(q))
        assert (act("root.z"), act("root.z.inner")) in flow
        assert (act("root.z"), act("root.z.off")) not in flow

    def test_deactivation_closure_is_unconditional(self):
        g = graph_of(
            """Component root {
              Spike go;
              Component z { Component<d> off {}; };
              go ->! z;
            }"""
        )
        flow = {(e.src, e.dst) for e in g.edges if e.flow}
        assert (
            Vertex("deactivate", P("root.z")),
            Vertex("deactivate", P("root.z.off")),
        ) in flow

    def test_to_dot_mentions_vertices(self):
        g = graph_of("Component root { Spike s; Spike t; s -> t; }")
        dot = g.to_dot()
        assert dot.startswith("digraph")
        assert "trigger:root.s" in dot


class TestFolding:
    def test_fold_with_known_value(self):
        y = P("root.y")
        e = Binary("<", Var(y), Const(int_value(3)))
        assert fold_expr(e, {y: int_value(3)}) == bool_value(False)
        assert fold_expr(e, {y: int_value(2)}) == bool_value(True)
        assert fold_expr(e, {}) is None

    def test_fold_short_circuits_over_partial_knowledge(self):
        y, z = P("root.y"), P("root.z")
        false_left = Binary("<", Var(y), Const(int_value(0)))
        unknown = Binary("<", Var(z), Const(int_value(0)))
        e = Binary("&&", false_left, unknown)
        assert fold_expr(e, {y: int_value(5)}) == bool_value(False)
        e = Binary("||", Binary(">", Var(y), Const(int_value(0))), unknown)
        assert fold_expr(e, {y: int_value(5)}) == bool_value(True)

    def test_fold_is_silent_on_errors(self):
        y = P("root.y")
        e = Binary("/", Const(int_value(1)), Var(y))
        assert fold_expr(e, {y: int_value(0)}) is None


class TestPruning:
    def _edge_count(self, g, apath, bname):
        src = Vertex("trigger", P(apath))
        dst = Vertex("binding", P(bname))
        return sum(1 for e in g.edges if e.src == src and e.dst == dst)

    def test_literal_assignment_prunes_false_condition(self):
        p = elaborate(
            """Component root {
              Int y 0; Spike hit;
              a: 3 =: y;
              (y < 3) -> hit;
            }"""
        )
        g = build_prop_graph(p)
        assert self._edge_count(g, "root.a", "root._g0") == 1
        pruned = prune_constant_conditions(g, p)
        assert self._edge_count(pruned, "root.a", "root._g0") == 0

    def test_condition_that_stays_true_is_kept(self):
        p = elaborate(
            """Component root {
              Int y 1; Spike hit;
              a: 0 =: y;
              (y == 0) -> hit;
            }"""
        )
        g = prune_constant_conditions(build_prop_graph(p), p)
        assert self._edge_count(g, "root.a", "root._g0") == 1

    def test_non_literal_assignment_is_not_pruned(self):
        p = elaborate(
            """Component root {
              Int y 0; Int z 5; Spike hit;
              a: z =: y;
              (y < 0) -> hit;
            }"""
        )
        g = prune_constant_conditions(build_prop_graph(p), p)
        assert self._edge_count(g, "root.a", "root._g0") == 1


class TestCycles:
    def test_two_spike_loop(self):
        p = elaborate(data("cyclic.smala"))
        g, diags = check_all(p)
        assert codes(diags) == ["DEP_CYCLE"]
        (d,) = diags
        assert d.severity == "error"

    def test_self_loop(self):
        g = graph_of("Component root { Spike s; s -> s; }")
        assert codes(check_cycles(g)) == ["DEP_CYCLE"]

    def test_acyclic_chain_is_clean(self):
        g = graph_of("Component root { Spike s; Spike t; s -> t; }")
        assert check_cycles(g) == []

    def test_counter_needs_pruning(self, counter):
        _, pruned = check_all(counter, prune=True)
        assert pruned == []
        _, unpruned = check_all(counter, prune=False)
        cycles = [d for d in unpruned if d.code == "DEP_CYCLE"]
        assert len(cycles) == 1
        assert P("root.f._g1.btn2.r") in cycles[0].paths

    def test_scc_and_topo(self):
        g = graph_of(data("cyclic.smala"))
        sccs = [c for c in strongly_connected_components(g) if len(c) > 1]
        assert len(sccs) == 1
        acyclic = graph_of("Component root { Spike s; Spike t; s -> t; }")
        order = topo_order(acyclic)
        pos = {v: i for i, v in enumerate(order)}
        for e in acyclic.edges:
            assert pos[e.src] < pos[e.dst]


class TestRssa:
    def test_two_writers_reachable_from_one_trigger(self):
        p = elaborate(data("conflict.smala"))
        g, diags = check_all(p)
        rssa = [d for d in diags if d.code == "RSSA"]
        assert rssa and P("root.y") in rssa[0].paths
        assert has_errors(diags)

    def test_single_writer_is_clean(self):
        p = elaborate("Component root { Int y 0; Spike s; s -> a; a: 1 =: y; }")
        assert check_rssa(*_graph_and_program(p)) == []

    def test_external_assign_counts_as_a_writer(self):
        p = elaborate(
            """Component root {
              Int x 0; Int y 0;
              x -> a; a: 1 =: y;
              x -> b; b: last y =: x;
            }"""
        )
        g = build_prop_graph(p)
        diags = check_rssa(g, p)
        # assigning x externally triggers b, which writes x again
        assert any(P("root.x") in d.paths for d in diags)


class TestActivationConflicts:
    def test_unconditional_conflict(self):
        p = elaborate(
            """Component root {
              Spike s; Component z {};
              s -> z; s ->! z;
            }"""
        )
        g = build_prop_graph(p)
        diags = check_activation_conflicts(g, p)
        assert codes(diags) == ["ACT_CONFLICT"]
        assert P("root.z") in diags[0].paths

    def test_disjoint_conditions_clear_the_conflict(self):
        p = elaborate(
            """Component root {
              Int y 0; Component z {};
              (y == 0) -> z;
              (y == 1) ->! z;
            }"""
        )
        g = build_prop_graph(p)
        assert check_activation_conflicts(g, p) == []

    def test_overlapping_conditions_still_conflict(self):
        p = elaborate(
            """Component root {
              Int y 0; Component z {};
              (y < 2) -> z;
              (y < 1) ->! z;
            }"""
        )
        g = build_prop_graph(p)
        assert codes(check_activation_conflicts(g, p)) == ["ACT_CONFLICT"]

    def test_counter_conflicts_cleared_by_dominating_conditions(self, counter):
        g, diags = check_all(counter)
        assert [d for d in diags if d.code == "ACT_CONFLICT"] == []

    def test_conditions_disjoint_predicate(self):
        y = P("root.y")
        lt = Binary("<", Var(y), Const(int_value(3)))
        eq = Binary("==", Var(y), Const(int_value(3)))
        gt = Binary(">", Var(y), Const(int_value(1)))
        assert conditions_disjoint(lt, eq)
        # y < 3 and y > 2 have no integer solution in common
        assert conditions_disjoint(lt, Binary(">", Var(y), Const(int_value(2))))
        assert not conditions_disjoint(lt, gt)  # both true at y == 2


class TestDeadParentAssign:
    def test_assignment_into_inactive_zone(self):
        p = elaborate(data("deadparent.smala"))
        g, diags = check_all(p)
        dead = [d for d in diags if d.code == "DEAD_PARENT_ASSIGN"]
        assert dead and P("root.z.y") in dead[0].paths

    def test_assignment_into_deactivatable_zone(self):
        p = elaborate(
            """Component root {
              Spike s; Component z { Int y 0; };
              s ->! z;
              s -> a; a: 1 =: z.y;
            }"""
        )
        g = build_prop_graph(p)
        assert codes(check_dead_parent_assign(g, p)) == ["DEAD_PARENT_ASSIGN"]

    def test_stable_target_is_clean(self, counter):
        g = build_prop_graph(counter)
        assert check_dead_parent_assign(g, counter) == []


class TestUnreachable:
    def test_binding_with_no_event_producer(self):
        # z is never the target of any activation, so the A?-binding on it
        # can never fire.
        p = elaborate(
            """Component root {
              Spike t;
              Component z {};
              z -> t;
            }"""
        )
        g = build_prop_graph(p)
        diags = check_unreachable(g, p)
        assert codes(diags) == ["UNREACHABLE"]
        assert diags[0].severity == "warning"
        assert not has_errors(diags)

    def test_counter_has_no_unreachable_bindings(self, counter):
        g, diags = check_all(counter)
        assert [d for d in diags if d.code == "UNREACHABLE"] == []


def _graph_and_program(p):
    return build_prop_graph(p), p
