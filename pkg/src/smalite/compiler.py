"""Lowering to an object-style imperative IR.

Three passes over a checked program:
  flatten   walk the pruned propagation graph from each external event and
            produce one guarded instruction per event-producing step, with
            the guards accumulated along the chain;
  schedule  order each instruction list so that every write of a field or
            activation flag precedes every read of it (snapshot reads --
            `last` and edge tests -- impose no order);
  gen_ir    package fields, flags, and one method per external event.

The guards re-test activation flags at execution time because a flag may be
flipped earlier in the same method; the schedule makes those reads see the
reaction's final value, which is exactly what the reference interpreter's
fixed point computes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .core import (
    Assignment,
    Binding,
    ChangeOf,
    Component,
    Cond,
    DoActivate,
    DoDeactivate,
    DoTrigger,
    Expr,
    InitActivation,
    Path,
    Process,
    Property,
    SmaliteError,
    TriggerOf,
    ActivateOf,
    DeactivateOf,
    Ty,
    Value,
    expr_to_str,
    free_vars,
    last_vars,
)
from .analysis import PropGraph, Vertex, check_cycles
from .semantics import (
    ProgramIndex,
    _activation_closure,
    _deactivation_closure,
    index_program,
    init_activation,
)


class CompileError(SmaliteError):
    pass


class ScheduleCycle(CompileError):
    pass


# ---------------------------------------------------------------------------
# Guarded instructions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlagTest:
    """The activation flag at `path` currently holds."""

    path: Path


@dataclass(frozen=True)
class EdgeTest:
    """The activation flag at `path` held (or not) at reaction entry."""

    path: Path
    was_active: bool


@dataclass(frozen=True)
class ExprTest:
    """The expression evaluates to Bool true over current fields."""

    expr: Expr


Test = Union[FlagTest, EdgeTest, ExprTest]

#: In a property-assignment method, the written value is the method parameter.
PARAM = None


@dataclass(frozen=True)
class SetField:
    path: Path
    expr: Optional[Expr]  # PARAM for the external-assignment method


@dataclass(frozen=True)
class SetFlag:
    path: Path
    value: bool


@dataclass(frozen=True)
class EmitTrigger:
    path: Path


Instr = Union[SetField, SetFlag, EmitTrigger]


@dataclass(frozen=True)
class GuardedInstr:
    guard: tuple[Test, ...]
    instr: Instr
    provenance: Path  # the source binding/assignment/closure path


# ---------------------------------------------------------------------------
# Pass 1: flatten
# ---------------------------------------------------------------------------

EventKey = tuple[str, Path]  # ("trigger", q) | ("assign", q)


def flatten(g: PropGraph, p: Process) -> dict[EventKey, list[GuardedInstr]]:
    if check_cycles(g):
        raise CompileError("cannot flatten a cyclic propagation graph")
    idx = index_program(p)
    flow = {(e.src, e.dst) for e in g.edges if e.flow}

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

    out: dict[EventKey, list[GuardedInstr]] = {}

    def run_source(key: EventKey, start: "callable") -> None:
        instrs: list[GuardedInstr] = []
        seen: set[tuple[tuple[Test, ...], Instr]] = set()

        def emit(guard: list[Test], instr: Instr, prov: Path) -> None:
            fingerprint = (tuple(guard), instr)
            if fingerprint in seen:
                return
            seen.add(fingerprint)
            instrs.append(GuardedInstr(tuple(guard), instr, prov))

        def add(guard: list[Test], test: Test) -> list[Test]:
            return guard if test in guard else guard + [test]

        def parent_flag(guard: list[Test], path: Path) -> list[Test]:
            parent = path.parent
            if parent.is_root:
                return guard
            return add(guard, FlagTest(parent))

        def on_binding(src: Vertex, bpath: Path, b: Binding, guard: list[Test]) -> None:
            if (src, Vertex("binding", bpath)) not in flow:
                return  # edge pruned away
            bg = add(guard, FlagTest(bpath))
            if isinstance(b.lhs, Cond):
                bg = add(bg, ExprTest(b.lhs.expr))
            rhs = b.rhs
            rg = parent_flag(bg, rhs.path)
            if isinstance(rhs, DoTrigger):
                on_trigger(rhs.path, rg)
            elif isinstance(rhs, DoActivate):
                on_activate(rhs.path, rg)
            elif isinstance(rhs, DoDeactivate):
                on_deactivate(rhs.path, rg)

        def on_trigger(q: Path, guard: list[Test]) -> None:
            if q in idx.spikes:
                emit(guard, EmitTrigger(q), q)
            node = idx.nodes[q]
            src = Vertex("trigger", q)
            if isinstance(node, Assignment):
                ag = parent_flag(parent_flag(guard, q), node.target)
                emit(ag, SetField(node.target, node.expr), q)
                on_assigned(src, node.target, ag)
            for bpath, b in trig_listeners.get(q, []):
                on_binding(src, bpath, b, guard)

        def on_assigned(src: Vertex, target: Path, guard: list[Test]) -> None:
            for bpath, b in chg_listeners.get(target, []):
                on_binding(src, bpath, b, guard)
            for bpath, b in cond_listeners.get(target, []):
                on_binding(src, bpath, b, guard)

        def on_activate(c: Path, guard: list[Test]) -> None:
            eg = add(guard, EdgeTest(c, was_active=False))
            emit(eg, SetFlag(c, True), c)
            src = Vertex("activate", c)
            for bpath, b in act_listeners.get(c, []):
                on_binding(src, bpath, b, eg)
            node = idx.nodes[c]
            if isinstance(node, Component):
                for q in _activation_closure(node, c):
                    qg = add(eg, EdgeTest(q, was_active=False))
                    emit(qg, SetFlag(q, True), q)
                    qsrc = Vertex("activate", q)
                    for bpath, b in act_listeners.get(q, []):
                        on_binding(qsrc, bpath, b, qg)

        def on_deactivate(c: Path, guard: list[Test]) -> None:
            eg = add(guard, EdgeTest(c, was_active=True))
            emit(eg, SetFlag(c, False), c)
            src = Vertex("deactivate", c)
            for bpath, b in deact_listeners.get(c, []):
                on_binding(src, bpath, b, eg)
            node = idx.nodes[c]
            if isinstance(node, Component):
                for q in _deactivation_closure(node, c):
                    qg = add(eg, EdgeTest(q, was_active=True))
                    emit(qg, SetFlag(q, False), q)
                    qsrc = Vertex("deactivate", q)
                    for bpath, b in deact_listeners.get(q, []):
                        on_binding(qsrc, bpath, b, qg)

        start(emit, on_trigger, on_assigned)
        out[key] = instrs

    for q in sorted(idx.transients):
        def start_trigger(emit, on_trigger, on_assigned, q=q):
            on_trigger(q, [])

        run_source(("trigger", q), start_trigger)

    for q in sorted(idx.property_tys):
        def start_assign(emit, on_trigger, on_assigned, q=q):
            # The external event itself writes the property, then propagates.
            emit([], SetField(q, PARAM), q)
            on_assigned(Vertex("ext-assign", q), q, [])

        run_source(("assign", q), start_assign)

    return out


# ---------------------------------------------------------------------------
# Pass 2: schedule
# ---------------------------------------------------------------------------


def _read_fields(gi: GuardedInstr) -> set[Path]:
    """Fields whose CURRENT value the instruction reads (snapshot reads excluded)."""
    reads: set[Path] = set()
    for t in gi.guard:
        if isinstance(t, ExprTest):
            reads |= free_vars(t.expr)
    if isinstance(gi.instr, SetField) and gi.instr.expr is not None:
        reads |= free_vars(gi.instr.expr)
    return reads


def _read_flags(gi: GuardedInstr) -> set[Path]:
    return {t.path for t in gi.guard if isinstance(t, FlagTest)}


def schedule(
    flat: dict[EventKey, list[GuardedInstr]], p: Process
) -> dict[EventKey, list[GuardedInstr]]:
    """Writer-before-reader total order per method, document/discovery order
    as the tie-break (deterministic output)."""
    out: dict[EventKey, list[GuardedInstr]] = {}
    for key, instrs in flat.items():
        n = len(instrs)
        succ: list[set[int]] = [set() for _ in range(n)]
        indeg = [0] * n
        field_writers: dict[Path, list[int]] = {}
        flag_writers: dict[Path, list[int]] = {}
        for i, gi in enumerate(instrs):
            if isinstance(gi.instr, SetField):
                field_writers.setdefault(gi.instr.path, []).append(i)
            elif isinstance(gi.instr, SetFlag):
                flag_writers.setdefault(gi.instr.path, []).append(i)
        for j, gi in enumerate(instrs):
            deps = set()
            for q in _read_fields(gi):
                deps.update(field_writers.get(q, []))
            for q in _read_flags(gi):
                deps.update(flag_writers.get(q, []))
            for i in deps:
                if i == j:
                    raise ScheduleCycle(
                        f"instruction for {gi.provenance} reads what it writes"
                    )
                if j not in succ[i]:
                    succ[i].add(j)
                    indeg[j] += 1
        ready = sorted(i for i in range(n) if indeg[i] == 0)
        order: list[int] = []
        while ready:
            i = ready.pop(0)
            order.append(i)
            changed = False
            for j in sorted(succ[i]):
                indeg[j] -= 1
                if indeg[j] == 0:
                    ready.append(j)
                    changed = True
            if changed:
                ready.sort()
        if len(order) != n:
            stuck = sorted(
                str(instrs[i].provenance) for i in range(n) if indeg[i] > 0
            )
            raise ScheduleCycle(f"cyclic data dependencies among: {', '.join(stuck)}")
        out[key] = [instrs[i] for i in order]
    return out


# ---------------------------------------------------------------------------
# Pass 3: object generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IrMethod:
    kind: str  # 'trigger' | 'assign'
    path: Path
    param_ty: Optional[Ty]  # set for 'assign' methods
    instrs: tuple[GuardedInstr, ...]
    last_fields: frozenset[Path]  # fields to snapshot at entry


@dataclass(frozen=True)
class IrObject:
    fields: tuple[tuple[Path, Ty, Expr], ...]  # doc order, initializer expr
    flags: tuple[tuple[Path, bool], ...]  # sorted, initial activation
    methods: dict[EventKey, IrMethod]
    spikes: frozenset[Path]


def _method_last_fields(instrs: list[GuardedInstr]) -> frozenset[Path]:
    lasts: set[Path] = set()
    for gi in instrs:
        for t in gi.guard:
            if isinstance(t, ExprTest):
                lasts |= last_vars(t.expr)
        if isinstance(gi.instr, SetField) and gi.instr.expr is not None:
            lasts |= last_vars(gi.instr.expr)
    return frozenset(lasts)


def gen_ir(p: Process, scheduled: dict[EventKey, list[GuardedInstr]]) -> IrObject:
    idx = index_program(p)
    fields = tuple(
        (path, node.ty, node.init)
        for path, node in idx.nodes.items()
        if isinstance(node, Property)
    )
    flags = tuple(
        (q, q in init_activation(p)) for q in sorted(idx.permanents)
    )
    methods: dict[EventKey, IrMethod] = {}
    for key, instrs in scheduled.items():
        kind, path = key
        param_ty = idx.property_tys[path] if kind == "assign" else None
        methods[key] = IrMethod(
            kind=kind,
            path=path,
            param_ty=param_ty,
            instrs=tuple(instrs),
            last_fields=_method_last_fields(instrs),
        )
    return IrObject(
        fields=fields, flags=flags, methods=methods, spikes=frozenset(idx.spikes)
    )


def compile_program(p: Process, g: PropGraph) -> IrObject:
    """flatten + schedule + gen_ir over an already-checked, pruned graph."""
    return gen_ir(p, schedule(flatten(g, p), p))


# ---------------------------------------------------------------------------
# Canonical IR text
# ---------------------------------------------------------------------------


def _test_to_str(t: Test) -> str:
    if isinstance(t, FlagTest):
        return f"flag {t.path}"
    if isinstance(t, EdgeTest):
        return f"was-active {t.path}" if t.was_active else f"was-inactive {t.path}"
    return f"({expr_to_str(t.expr)})"


def _instr_to_str(gi: GuardedInstr) -> str:
    instr = gi.instr
    if isinstance(instr, SetField):
        rhs = "param" if instr.expr is None else expr_to_str(instr.expr)
        body = f"set {instr.path} = {rhs}"
    elif isinstance(instr, SetFlag):
        body = f"flag {instr.path} = {'true' if instr.value else 'false'}"
    else:
        body = f"emit {instr.path}"
    if gi.guard:
        tests = " && ".join(_test_to_str(t) for t in gi.guard)
        return f"[{tests}] {body};"
    return f"{body};"


def dump_ir(ir: IrObject) -> str:
    lines = ["object {"]
    for path, ty, init in ir.fields:
        lines.append(f"  field<{ty.value}> {path} = {expr_to_str(init)};")
    for path, active in ir.flags:
        lines.append(f"  flag {path} = {'true' if active else 'false'};")
    for key in sorted(ir.methods, key=lambda k: (k[0], k[1])):
        m = ir.methods[key]
        header = f"  method {m.kind} {m.path}"
        if m.param_ty is not None:
            header += f" (param: {m.param_ty.value})"
        lines.append(header + " {")
        for gi in m.instrs:
            lines.append(f"    {_instr_to_str(gi)}")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
