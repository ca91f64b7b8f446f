"""Executes compiled IrObject reactions over event traces.

The VM is the executable stand-in for emitted C: it runs each method's
scheduled guarded instructions in order against a field/flag store and must
produce state dumps byte-identical to the reference interpreter's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .core import Assign, Event, Path, Trigger, Ty, Value
from .compiler import (
    EdgeTest,
    EmitTrigger,
    ExprTest,
    FlagTest,
    GuardedInstr,
    IrObject,
    SetField,
    SetFlag,
)
from .semantics import (
    ConflictingActivation,
    ConflictingAssign,
    EvalError,
    InadmissibleEvent,
    InitError,
    ReactionError,
    TraceError,
    UnsafeReaction,
    eval_expr,
)


@dataclass
class VmState:
    fields: dict[Path, Value]
    flags: dict[Path, bool]


@dataclass
class VmOutcome:
    fields: dict[Path, Value]
    active: frozenset[Path]
    emitted: frozenset[Path]


def vm_reset(ir: IrObject) -> VmState:
    fields: dict[Path, Value] = {}
    for path, _ty, init in ir.fields:
        try:
            fields[path] = eval_expr({}, fields, init)
        except EvalError as exc:
            raise InitError(path, str(exc)) from exc
    return VmState(fields=fields, flags={q: active for q, active in ir.flags})


def _parent_flag(st: VmState, path: Path) -> bool:
    parent = path.parent
    return parent.is_root or st.flags.get(parent, False)


def _check_admissible(st: VmState, ir: IrObject, ev: Event) -> None:
    if isinstance(ev, Trigger):
        if ("trigger", ev.path) not in ir.methods:
            raise InadmissibleEvent(ev, "not a transient process")
        return
    if isinstance(ev, Assign):
        method = ir.methods.get(("assign", ev.path))
        if method is None:
            raise InadmissibleEvent(ev, "not a property")
        if ev.value.ty is not method.param_ty:
            raise InadmissibleEvent(
                ev, f"property has type {method.param_ty}, value is {ev.value.ty}"
            )
        if not _parent_flag(st, ev.path):
            raise InadmissibleEvent(ev, "parent component is not active")
        return
    raise InadmissibleEvent(ev, "external activation changes are not supported")


def vm_react(st: VmState, ir: IrObject, ev: Event) -> VmOutcome:
    """Run the event's method: snapshot entry state, execute the scheduled
    guarded instructions, and collect the triggered spikes."""
    _check_admissible(st, ir, ev)
    key = ("trigger", ev.path) if isinstance(ev, Trigger) else ("assign", ev.path)
    method = ir.methods[key]
    param: Optional[Value] = ev.value if isinstance(ev, Assign) else None

    last_env = {q: st.fields[q] for q in method.last_fields}
    entry_flags = dict(st.flags)
    emitted: set[Path] = set()
    if isinstance(ev, Trigger) and ev.path in ir.spikes:
        emitted.add(ev.path)

    # Per-reaction write logs for dynamic conflict detection: the reference
    # semantics rejects two different values assigned to one property, or an
    # activation and a deactivation of one path, within a single reaction.
    field_writes: dict[Path, tuple[Value, Path]] = {}
    flag_writes: dict[Path, tuple[bool, Path]] = {}

    def guard_holds(gi: GuardedInstr) -> bool:
        for t in gi.guard:
            if isinstance(t, FlagTest):
                if not st.flags.get(t.path, False):
                    return False
            elif isinstance(t, EdgeTest):
                if entry_flags.get(t.path, False) is not t.was_active:
                    return False
            else:
                try:
                    v = eval_expr(last_env, st.fields, t.expr)
                except EvalError as exc:
                    raise UnsafeReaction(gi.provenance, str(exc)) from exc
                if v.ty is not Ty.BOOL:
                    raise UnsafeReaction(
                        gi.provenance, f"condition evaluated to a {v.ty}"
                    )
                if not v.raw:
                    return False
        return True

    for gi in method.instrs:
        if not guard_holds(gi):
            continue
        instr = gi.instr
        if isinstance(instr, SetField):
            if instr.expr is None:
                value = param
            else:
                try:
                    value = eval_expr(last_env, st.fields, instr.expr)
                except EvalError as exc:
                    raise UnsafeReaction(gi.provenance, str(exc)) from exc
            prior = field_writes.get(instr.path)
            if prior is not None and prior[0] != value:
                raise ConflictingAssign(instr.path)
            field_writes[instr.path] = (value, gi.provenance)
            st.fields[instr.path] = value
        elif isinstance(instr, SetFlag):
            prior = flag_writes.get(instr.path)
            if prior is not None and prior[0] is not instr.value:
                raise ConflictingActivation(instr.path)
            flag_writes[instr.path] = (instr.value, gi.provenance)
            st.flags[instr.path] = instr.value
        elif isinstance(instr, EmitTrigger):
            emitted.add(instr.path)

    return VmOutcome(
        fields=dict(st.fields),
        active=frozenset(q for q, on in st.flags.items() if on),
        emitted=frozenset(emitted),
    )


def vm_run_trace(ir: IrObject, events: Sequence[Event]) -> list[VmOutcome]:
    """Reset, then fold vm_react; outcome 0 is the initial state. A failing
    reaction raises TraceError with its 1-based index and prior outcomes."""
    st = vm_reset(ir)
    outcomes = [
        VmOutcome(
            fields=dict(st.fields),
            active=frozenset(q for q, on in st.flags.items() if on),
            emitted=frozenset(),
        )
    ]
    for i, ev in enumerate(events, start=1):
        snapshot_fields = dict(st.fields)
        snapshot_flags = dict(st.flags)
        try:
            outcomes.append(vm_react(st, ir, ev))
        except ReactionError as exc:
            st.fields = snapshot_fields
            st.flags = snapshot_flags
            raise TraceError(i, exc, outcomes) from exc
    return outcomes
