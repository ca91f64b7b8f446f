"""Static well-formedness checks over the event propagation graph.

The graph has one vertex per transient trigger, binding, and permanent
(de)activation mode, plus one source vertex per admissible external event.
An edge says the event produced at the source can satisfy the target's
left-hand side (or, for structural edges, is propagated by a component to
its children). All checks are conservative: they reason about reachability,
refined only by constant-condition pruning and by a literal-exclusivity
rule for pairs of provably disjoint conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .core import (
    ActivateOf,
    Assignment,
    Binding,
    ChangeOf,
    Component,
    Cond,
    Const,
    DeactivateOf,
    DoActivate,
    DoDeactivate,
    DoTrigger,
    Expr,
    InitActivation,
    Binary,
    Last,
    Path,
    Process,
    Property,
    SmaliteError,
    Spike,
    TriggerOf,
    Ty,
    Unary,
    Value,
    Var,
    bool_value,
    double_value,
    free_vars,
    int_value,
    lhs_to_str,
)
from .semantics import EvalError, ProgramIndex, _apply_binary, index_program

# Vertex kinds:
#   ext-trigger q   external trigger of a transient process
#   ext-assign q    external assignment to a property
#   trigger q       transient process q triggered (an assignment also executes)
#   binding q       binding q fires
#   activate q      Activate event on permanent q
#   deactivate q    Deactivate event on permanent q


@dataclass(frozen=True, order=True)
class Vertex:
    kind: str
    path: Path

    def __str__(self) -> str:
        return f"{self.kind} {self.path}"


@dataclass(frozen=True)
class Edge:
    src: Vertex
    dst: Vertex
    guard: str  # display label: a binding lhs, or "always"
    # flow edges model event propagation (src's event can satisfy dst's lhs);
    # ordering edges model a scheduling constraint only (src writes a flag
    # that dst's compiled guard reads) and never carry reachability.
    flow: bool = True


@dataclass
class PropGraph:
    vertices: list[Vertex]
    edges: list[Edge]
    succ: dict[Vertex, list[Edge]] = field(default_factory=dict)
    pred: dict[Vertex, list[Edge]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.succ = {v: [] for v in self.vertices}
        self.pred = {v: [] for v in self.vertices}
        for e in self.edges:
            self.succ[e.src].append(e)
            self.pred[e.dst].append(e)

    @property
    def ext_sources(self) -> list[Vertex]:
        return [v for v in self.vertices if v.kind.startswith("ext-")]

    def without_edges(self, removed: set[Edge]) -> "PropGraph":
        return PropGraph(self.vertices, [e for e in self.edges if e not in removed])

    def reachable(self, start: Vertex, flow_only: bool = True) -> set[Vertex]:
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for e in self.succ[v]:
                if flow_only and not e.flow:
                    continue
                if e.dst not in seen:
                    seen.add(e.dst)
                    stack.append(e.dst)
        return seen

    def to_dot(self) -> str:
        def ident(v: Vertex) -> str:
            return f'"{v.kind}:{v.path}"'

        lines = ["digraph propagation {"]
        for v in sorted(self.vertices):
            shape = "box" if v.kind.startswith("ext-") else "ellipse"
            lines.append(f"  {ident(v)} [shape={shape}];")
        for e in sorted(self.edges, key=lambda e: (e.src, e.dst, e.guard)):
            attrs = []
            if e.guard != "always":
                attrs.append(f'label="{e.guard}"')
            if not e.flow:
                attrs.append("style=dashed")
            suffix = f" [{', '.join(attrs)}]" if attrs else ""
            lines.append(f"  {ident(e.src)} -> {ident(e.dst)}{suffix};")
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # 'error' | 'warning'
    code: str  # RSSA | ACT_CONFLICT | DEAD_PARENT_ASSIGN | DEP_CYCLE | UNREACHABLE
    paths: tuple[Path, ...]
    message: str

    def __str__(self) -> str:
        where = ",".join(str(p) for p in self.paths)
        return f"{self.code} {where} {self.message}"


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------


def build_prop_graph(p: Process) -> PropGraph:
    idx = index_program(p)
    vertices: list[Vertex] = []
    edges: list[Edge] = []

    trig_listeners: dict[Path, list[tuple[Path, Binding]]] = {}
    chg_listeners: dict[Path, list[tuple[Path, Binding]]] = {}
    cond_listeners: dict[Path, list[tuple[Path, Binding]]] = {}
    act_listeners: dict[Path, list[tuple[Path, Binding]]] = {}
    deact_listeners: dict[Path, list[tuple[Path, Binding]]] = {}
    for bpath, b in idx.bindings:
        lhs = b.lhs
        if isinstance(lhs, TriggerOf):
            trig_listeners.setdefault(lhs.path, []).append((bpath, b))
        elif isinstance(lhs, ChangeOf):
            chg_listeners.setdefault(lhs.path, []).append((bpath, b))
        elif isinstance(lhs, Cond):
            for q in free_vars(lhs.expr):
                cond_listeners.setdefault(q, []).append((bpath, b))
        elif isinstance(lhs, ActivateOf):
            act_listeners.setdefault(lhs.path, []).append((bpath, b))
        elif isinstance(lhs, DeactivateOf):
            deact_listeners.setdefault(lhs.path, []).append((bpath, b))

    for q in sorted(idx.transients):
        vertices.append(Vertex("trigger", q))
        vertices.append(Vertex("ext-trigger", q))
    for q in sorted(idx.property_tys):
        vertices.append(Vertex("ext-assign", q))
    for q, _ in idx.bindings:
        vertices.append(Vertex("binding", q))
    for q in sorted(idx.permanents):
        vertices.append(Vertex("activate", q))
        vertices.append(Vertex("deactivate", q))

    def listener_edges(src: Vertex, listeners: list[tuple[Path, Binding]]) -> None:
        for bpath, b in listeners:
            edges.append(Edge(src, Vertex("binding", bpath), lhs_to_str(b.lhs)))

    def assign_effect_edges(src: Vertex, target: Path) -> None:
        listener_edges(src, chg_listeners.get(target, []))
        listener_edges(src, cond_listeners.get(target, []))

    for q in sorted(idx.transients):
        edges.append(Edge(Vertex("ext-trigger", q), Vertex("trigger", q), "always"))
        trig = Vertex("trigger", q)
        listener_edges(trig, trig_listeners.get(q, []))
        node = idx.nodes[q]
        if isinstance(node, Assignment):
            assign_effect_edges(trig, node.target)

    for q in sorted(idx.property_tys):
        assign_effect_edges(Vertex("ext-assign", q), q)

    for bpath, b in idx.bindings:
        src = Vertex("binding", bpath)
        rhs = b.rhs
        if isinstance(rhs, DoTrigger):
            edges.append(Edge(src, Vertex("trigger", rhs.path), "always"))
        elif isinstance(rhs, DoActivate):
            edges.append(Edge(src, Vertex("activate", rhs.path), "always"))
        elif isinstance(rhs, DoDeactivate):
            edges.append(Edge(src, Vertex("deactivate", rhs.path), "always"))

    # Ordering edges: a compiled guard reads an activation flag, so any
    # producer of that flag must be scheduled first. These carry no events.
    def order_edge(src: Vertex, dst: Vertex) -> None:
        edges.append(Edge(src, dst, "always", flow=False))

    def flag_reads(reader: Vertex, flag_path: Path) -> None:
        if flag_path in idx.permanents:
            order_edge(Vertex("activate", flag_path), reader)
            order_edge(Vertex("deactivate", flag_path), reader)

    for bpath, b in idx.bindings:
        reader = Vertex("binding", bpath)
        # The binding fires only while it is itself active.
        flag_reads(reader, bpath)
        # Producing an event on the right-hand side requires the target's
        # parent to be active.
        flag_reads(reader, b.rhs.path.parent)

    for apath, a in idx.assignments:
        reader = Vertex("trigger", apath)
        flag_reads(reader, apath.parent)
        flag_reads(reader, a.target.parent)

    # Delivery of an external event sourced under an initially-inactive
    # component depends on that component having been activated. For an
    # initially-active chain no same-reaction Activate can occur (the event's
    # admissibility means the chain is already active, so the no-op premise
    # suppresses it), hence no dependency.
    for q in sorted(idx.transients):
        c = q.parent
        while not c.is_root:
            node = idx.nodes.get(c)
            if isinstance(node, Component) and node.ia is InitActivation.INACTIVE:
                order_edge(Vertex("activate", c), Vertex("ext-trigger", q))
            c = c.parent

    for q in sorted(idx.permanents):
        act = Vertex("activate", q)
        deact = Vertex("deactivate", q)
        listener_edges(act, act_listeners.get(q, []))
        listener_edges(deact, deact_listeners.get(q, []))
        node = idx.nodes[q]
        if isinstance(node, Component):
            # Activation propagates only through children marked active.
            for child in node.children:
                if (
                    isinstance(child, (Binding, Component))
                    and child.ia is InitActivation.ACTIVE
                ):
                    edges.append(
                        Edge(act, Vertex("activate", q.child(child.name)), "always")
                    )
            # Deactivation always propagates.
            for child in node.children:
                if isinstance(child, (Binding, Component)):
                    edges.append(
                        Edge(deact, Vertex("deactivate", q.child(child.name)), "always")
                    )

    return PropGraph(vertices, edges)


# ---------------------------------------------------------------------------
# Constant folding and pruning
# ---------------------------------------------------------------------------


def fold_expr(e: Expr, known: dict[Path, Value]) -> Optional[Value]:
    """Sound partial constant folding; None means the value is unknown."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return known.get(e.path)
    if isinstance(e, Last):
        return None
    if isinstance(e, Unary):
        v = fold_expr(e.operand, known)
        if v is None:
            return None
        try:
            from .semantics import eval_expr

            return eval_expr({}, {}, Unary(e.op, Const(v)))
        except EvalError:
            return None
    if isinstance(e, Binary):
        left = fold_expr(e.left, known)
        right = fold_expr(e.right, known)
        if e.op in ("&&", "||"):
            # Short-circuit over partial knowledge.
            absorbing = e.op == "||"
            for side in (left, right):
                if side is not None and side.ty is Ty.BOOL and bool(side.raw) == absorbing:
                    return bool_value(absorbing)
        if left is None or right is None:
            return None
        try:
            return _apply_binary(e.op, left, right)
        except EvalError:
            return None
    return None


def prune_constant_conditions(g: PropGraph, p: Process) -> PropGraph:
    """Drop edges from a literal-constant assignment to a condition binding
    whose condition is provably false at that literal."""
    idx = index_program(p)
    removed: set[Edge] = set()
    for e in g.edges:
        if e.src.kind != "trigger" or e.dst.kind != "binding":
            continue
        src_node = idx.nodes.get(e.src.path)
        dst_node = idx.nodes.get(e.dst.path)
        if not isinstance(src_node, Assignment) or not isinstance(dst_node, Binding):
            continue
        if not isinstance(dst_node.lhs, Cond):
            continue
        if not isinstance(src_node.expr, Const):
            continue
        target = src_node.target
        if target not in free_vars(dst_node.lhs.expr):
            continue
        folded = fold_expr(dst_node.lhs.expr, {target: src_node.expr.value})
        if folded is not None and folded == bool_value(False):
            removed.add(e)
    return g.without_edges(removed) if removed else g


# ---------------------------------------------------------------------------
# Cycle detection (Tarjan)
# ---------------------------------------------------------------------------


def strongly_connected_components(g: PropGraph) -> list[list[Vertex]]:
    index: dict[Vertex, int] = {}
    lowlink: dict[Vertex, int] = {}
    on_stack: set[Vertex] = set()
    stack: list[Vertex] = []
    sccs: list[list[Vertex]] = []
    counter = 0

    def strongconnect(root: Vertex) -> None:
        nonlocal counter
        work = [(root, iter(g.succ[root]))]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for edge in it:
                w = edge.dst
                if w not in index:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(g.succ[w])))
                    advanced = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)

    for v in g.vertices:
        if v not in index:
            strongconnect(v)
    return sccs


def topo_order(g: PropGraph) -> list[Vertex]:
    """Reverse-postorder of an acyclic graph (callers check cycles first)."""
    seen: set[Vertex] = set()
    order: list[Vertex] = []

    def visit(v: Vertex) -> None:
        stack = [(v, iter(sorted(g.succ[v], key=lambda e: e.dst)))]
        seen.add(v)
        while stack:
            node, it = stack[-1]
            for edge in it:
                if edge.dst not in seen:
                    seen.add(edge.dst)
                    stack.append((edge.dst, iter(sorted(g.succ[edge.dst], key=lambda e: e.dst))))
                    break
            else:
                order.append(node)
                stack.pop()

    for v in sorted(g.vertices):
        if v not in seen:
            visit(v)
    order.reverse()
    return order


def check_cycles(g: PropGraph) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    self_loops = {e.src for e in g.edges if e.src == e.dst}
    for scc in strongly_connected_components(g):
        if len(scc) < 2 and scc[0] not in self_loops:
            continue
        paths = tuple(sorted({v.path for v in scc}))
        names = " -> ".join(str(v) for v in sorted(scc))
        diags.append(
            Diagnostic("error", "DEP_CYCLE", paths, f"dependency loop: {names}")
        )
    return diags


# ---------------------------------------------------------------------------
# Condition exclusivity
# ---------------------------------------------------------------------------


def _atomic_comparison(e: Expr) -> Optional[tuple[Path, str, Value]]:
    """Match `var OP literal` / `literal OP var` with a numeric literal."""
    if not isinstance(e, Binary) or e.op not in ("==", "!=", "<", "<=", ">", ">="):
        return None
    flip = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "==": "==", "!=": "!="}
    if isinstance(e.left, Var) and isinstance(e.right, Const):
        var, op, lit = e.left.path, e.op, e.right.value
    elif isinstance(e.left, Const) and isinstance(e.right, Var):
        var, op, lit = e.right.path, flip[e.op], e.left.value
    else:
        return None
    if lit.ty not in (Ty.INT, Ty.DOUBLE):
        return None
    return var, op, lit


def conditions_disjoint(e1: Expr, e2: Expr) -> bool:
    """True only when the two conditions are atomic comparisons of the same
    variable that no single value can satisfy simultaneously."""
    a1 = _atomic_comparison(e1)
    a2 = _atomic_comparison(e2)
    if a1 is None or a2 is None:
        return False
    var1, op1, lit1 = a1
    var2, op2, lit2 = a2
    if var1 != var2 or lit1.ty is not lit2.ty:
        return False
    if lit1.ty is Ty.INT:
        candidates = {
            lit1.raw - 1, lit1.raw, lit1.raw + 1,
            lit2.raw - 1, lit2.raw, lit2.raw + 1,
        }
        mk = int_value
    else:
        candidates = {
            lit1.raw - 1.0, lit1.raw, lit1.raw + 1.0,
            lit2.raw - 1.0, lit2.raw, lit2.raw + 1.0,
            (lit1.raw + lit2.raw) / 2.0,
        }
        mk = double_value

    def holds(op: str, x, lit) -> bool:
        return {
            "==": x == lit,
            "!=": x != lit,
            "<": x < lit,
            "<=": x <= lit,
            ">": x > lit,
            ">=": x >= lit,
        }[op]

    for c in candidates:
        try:
            mk(c)
        except ValueError:
            continue
        if holds(op1, c, lit1.raw) and holds(op2, c, lit2.raw):
            return False
    return True


def _cond_dominators(
    g: PropGraph, source: Vertex, idx: ProgramIndex
) -> dict[Vertex, frozenset[Path]]:
    """For each vertex reachable from `source`, the condition bindings that
    lie on every propagation path from the source. Requires an acyclic graph."""
    reach = g.reachable(source)
    doms: dict[Vertex, frozenset[Path]] = {}
    for v in topo_order(g):
        if v not in reach:
            continue
        preds = [e.src for e in g.pred[v] if e.flow and e.src in reach and e.src in doms]
        if v == source:
            acc: frozenset[Path] = frozenset()
        elif preds:
            acc = frozenset.intersection(*(doms[p] for p in preds))
        else:
            acc = frozenset()
        if v.kind == "binding":
            node = idx.nodes[v.path]
            if isinstance(node, Binding) and isinstance(node.lhs, Cond):
                acc = acc | {v.path}
        doms[v] = acc
    return doms


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def _source_label(v: Vertex) -> str:
    kind = "trigger" if v.kind == "ext-trigger" else "assign"
    return f"external {kind} {v.path}"


def check_rssa(g: PropGraph, p: Process) -> list[Diagnostic]:
    """At most one reachable assignment per property per external event."""
    idx = index_program(p)
    diags: list[Diagnostic] = []
    for source in g.ext_sources:
        producers: dict[Path, list[str]] = {}
        if source.kind == "ext-assign":
            producers.setdefault(source.path, []).append("the external assignment")
        for v in g.reachable(source):
            if v.kind != "trigger":
                continue
            node = idx.nodes.get(v.path)
            if isinstance(node, Assignment):
                producers.setdefault(node.target, []).append(str(v.path))
        for target, who in sorted(producers.items()):
            if len(who) > 1:
                diags.append(
                    Diagnostic(
                        "error",
                        "RSSA",
                        (target,),
                        f"{_source_label(source)} can reach multiple assignments"
                        f" to {target}: {', '.join(sorted(who))}",
                    )
                )
    return diags


def check_activation_conflicts(g: PropGraph, p: Process) -> list[Diagnostic]:
    """No external event may reach both Activate and Deactivate producers for
    one path, unless disjoint conditions provably separate the two chains."""
    idx = index_program(p)
    cyclic = bool(check_cycles(g))
    diags: list[Diagnostic] = []
    for source in g.ext_sources:
        reach = g.reachable(source)
        acts = {v.path for v in reach if v.kind == "activate"}
        deacts = {v.path for v in reach if v.kind == "deactivate"}
        both = acts & deacts
        if not both:
            continue
        doms = None if cyclic else _cond_dominators(g, source, idx)
        for target in sorted(both):
            if doms is not None and _exclusive(
                idx, doms, Vertex("activate", target), Vertex("deactivate", target)
            ):
                continue
            diags.append(
                Diagnostic(
                    "error",
                    "ACT_CONFLICT",
                    (target,),
                    f"{_source_label(source)} can both activate and deactivate {target}",
                )
            )
    return diags


def _exclusive(
    idx: ProgramIndex,
    doms: dict[Vertex, frozenset[Path]],
    a: Vertex,
    b: Vertex,
) -> bool:
    for c1 in doms.get(a, frozenset()):
        e1 = idx.nodes[c1].lhs.expr  # type: ignore[union-attr]
        for c2 in doms.get(b, frozenset()):
            if c1 == c2:
                continue
            e2 = idx.nodes[c2].lhs.expr  # type: ignore[union-attr]
            if conditions_disjoint(e1, e2):
                return True
    return False


def check_dead_parent_assign(g: PropGraph, p: Process) -> list[Diagnostic]:
    """Every assignment target must live in a component that can never be
    deactivated (statically active up the chain, never a Deactivate target)."""
    idx = index_program(p)
    reachable: set[Vertex] = set()
    for source in g.ext_sources:
        reachable |= g.reachable(source)
    deactivatable = {v.path for v in reachable if v.kind == "deactivate"}
    diags: list[Diagnostic] = []

    def always_active(path: Path) -> bool:
        while not path.is_root:
            node = idx.nodes.get(path)
            if not isinstance(node, Component):
                return False
            if node.ia is not InitActivation.ACTIVE:
                return False
            if path in deactivatable:
                return False
            path = path.parent
        return True

    targets: dict[Path, list[Path]] = {}
    for apath, assignment in idx.assignments:
        targets.setdefault(assignment.target, []).append(apath)
    for target, sources in sorted(targets.items()):
        if not always_active(target.parent):
            diags.append(
                Diagnostic(
                    "error",
                    "DEAD_PARENT_ASSIGN",
                    (target,) + tuple(sorted(sources)),
                    f"{target} can be assigned while its parent is deactivated"
                    f" (assignments: {', '.join(str(s) for s in sorted(sources))})",
                )
            )
    return diags


def check_unreachable(g: PropGraph, p: Process) -> list[Diagnostic]:
    """Bindings no external event can ever reach (warning only)."""
    reachable: set[Vertex] = set()
    for source in g.ext_sources:
        reachable |= g.reachable(source)
    diags: list[Diagnostic] = []
    for v in sorted(g.vertices):
        if v.kind == "binding" and v not in reachable:
            diags.append(
                Diagnostic(
                    "warning",
                    "UNREACHABLE",
                    (v.path,),
                    f"binding {v.path} is not reachable from any external event",
                )
            )
    return diags


def check_all(p: Process, prune: bool = True) -> tuple[PropGraph, list[Diagnostic]]:
    """Run every check on the (optionally pruned) propagation graph.

    Diagnostics never abort early; all checks report together.
    """
    g = build_prop_graph(p)
    if prune:
        g = prune_constant_conditions(g, p)
    diags: list[Diagnostic] = []
    diags.extend(check_cycles(g))
    diags.extend(check_rssa(g, p))
    diags.extend(check_activation_conflicts(g, p))
    diags.extend(check_dead_parent_assign(g, p))
    diags.extend(check_unreachable(g, p))
    return g, diags


def has_errors(diags: Iterable[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diags)
