"""Reference interpreter: initialization, expression evaluation, and the
reaction relation computed as saturate-then-verify fixed point.

A reaction starts from the external event, repeatedly updates the candidate
state and derives every event one rule application away, and stops when the
event set is saturated. The resulting set must then satisfy the reaction
equation exactly under the final state, and the whole program must be safe
(every expression that had to be evaluated did evaluate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .core import (
    Activate,
    ActivateOf,
    Assign,
    Assignment,
    Binary,
    Binding,
    ChangeOf,
    Component,
    Cond,
    Const,
    Deactivate,
    DeactivateOf,
    DoActivate,
    DoDeactivate,
    DoTrigger,
    Event,
    Expr,
    INT_MAX,
    INT_MIN,
    InitActivation,
    Kind,
    Last,
    Path,
    Process,
    Property,
    SmaliteError,
    Spike,
    Trigger,
    TriggerOf,
    Ty,
    Unary,
    Value,
    Var,
    bool_value,
    classify,
    double_value,
    format_event,
    format_value,
    free_vars,
    int_value,
    iter_processes,
    str_value,
)

Environment = dict[Path, Value]
Activation = frozenset[Path]


class EvalError(SmaliteError):
    kind = "eval"


class InitError(SmaliteError):
    kind = "init"

    def __init__(self, path: Path, cause: str):
        super().__init__(f"initialization of {path} failed: {cause}")
        self.path = path


class ReactionError(SmaliteError):
    kind = "reaction"


class UnsafeReaction(ReactionError):
    kind = "unsafe"

    def __init__(self, path: Path, cause: str):
        super().__init__(f"unsafe reaction at {path}: {cause}")
        self.path = path
        self.cause = cause


class ConflictingAssign(ReactionError):
    kind = "conflicting-assign"

    def __init__(self, path: Path):
        super().__init__(f"conflicting assignments to {path} in one reaction")
        self.path = path


class ConflictingActivation(ReactionError):
    kind = "conflicting-activation"

    def __init__(self, path: Path):
        super().__init__(f"both activation and deactivation of {path} in one reaction")
        self.path = path


class NonCausalReaction(ReactionError):
    kind = "non-causal"

    def __init__(self, detail: str = ""):
        super().__init__(
            "saturated event set does not satisfy the reaction equation"
            + (f": {detail}" if detail else "")
        )


class DivergentReaction(ReactionError):
    kind = "divergent"


class InadmissibleEvent(ReactionError):
    kind = "inadmissible"

    def __init__(self, ev: Event, why: str):
        super().__init__(f"inadmissible external event '{format_event(ev)}': {why}")


class TraceError(SmaliteError):
    """A reaction in a trace failed; carries the failing index and outcomes so far."""

    def __init__(self, index: int, cause: SmaliteError, outcomes: list["ReactionOutcome"]):
        super().__init__(f"reaction {index}: {cause}")
        self.index = index
        self.cause = cause
        self.outcomes = outcomes


@dataclass(frozen=True)
class ReactState:
    env: dict[Path, Value]
    activ: frozenset[Path]


@dataclass(frozen=True)
class ReactionOutcome:
    state: ReactState
    emitted: frozenset[Trigger]
    events: frozenset[Event] = frozenset()


# ---------------------------------------------------------------------------
# Expression evaluation
# ---------------------------------------------------------------------------


def value_to_display(v: Value) -> str:
    """The `str` operator's rendering (strings stay unquoted)."""
    if v.ty is Ty.STR:
        return v.raw  # type: ignore[return-value]
    return format_value(v)


def _check_int(n: int) -> Value:
    if not (INT_MIN <= n <= INT_MAX):
        raise EvalError(f"integer overflow: {n}")
    return int_value(n)


def _int_div(a: int, b: int) -> int:
    # C semantics: truncation toward zero.
    q = a // b
    if q < 0 and q * b != a:
        q += 1
    return q


def _double_div(a: float, b: float) -> float:
    if b != 0.0:
        return a / b
    if math.isnan(a) or a == 0.0:
        return math.nan
    sign = math.copysign(1.0, a) * math.copysign(1.0, b)
    return math.inf * sign


def eval_expr(last_env: Environment, env: Environment, e: Expr) -> Value:
    """Evaluate `e`; current reads hit `env`, `last` reads hit `last_env`."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.path]
        except KeyError:
            raise EvalError(f"unbound property {e.path}") from None
    if isinstance(e, Last):
        try:
            return last_env[e.path]
        except KeyError:
            raise EvalError(f"unbound property {e.path} in last-environment") from None
    if isinstance(e, Unary):
        v = eval_expr(last_env, env, e.operand)
        if e.op == "-":
            if v.ty is Ty.INT:
                return _check_int(-v.raw)
            if v.ty is Ty.DOUBLE:
                return double_value(-v.raw)
            raise EvalError(f"unary '-' on a {v.ty}")
        if e.op == "!":
            if v.ty is Ty.BOOL:
                return bool_value(not v.raw)
            raise EvalError(f"'!' on a {v.ty}")
        if e.op == "str":
            return str_value(value_to_display(v))
        raise EvalError(f"unknown unary operator {e.op!r}")
    if isinstance(e, Binary):
        a = eval_expr(last_env, env, e.left)
        b = eval_expr(last_env, env, e.right)
        return _apply_binary(e.op, a, b)
    raise EvalError(f"not an expression: {e!r}")


def _apply_binary(op: str, a: Value, b: Value) -> Value:
    if op in ("&&", "||"):
        if a.ty is Ty.BOOL and b.ty is Ty.BOOL:
            return bool_value((a.raw and b.raw) if op == "&&" else (a.raw or b.raw))
        raise EvalError(f"{op!r} on {a.ty} and {b.ty}")
    if op in ("==", "!="):
        if a.ty is not b.ty:
            raise EvalError(f"{op!r} on {a.ty} and {b.ty}")
        eq = a.raw == b.raw
        return bool_value(eq if op == "==" else not eq)
    if op in ("<", "<=", ">", ">="):
        if a.ty is not b.ty or a.ty not in (Ty.INT, Ty.DOUBLE):
            raise EvalError(f"{op!r} on {a.ty} and {b.ty}")
        res = {
            "<": a.raw < b.raw,
            "<=": a.raw <= b.raw,
            ">": a.raw > b.raw,
            ">=": a.raw >= b.raw,
        }[op]
        return bool_value(res)
    if op == "+" and a.ty is Ty.STR and b.ty is Ty.STR:
        return str_value(a.raw + b.raw)  # type: ignore[operator]
    if a.ty is not b.ty or a.ty not in (Ty.INT, Ty.DOUBLE):
        raise EvalError(f"{op!r} on {a.ty} and {b.ty}")
    if a.ty is Ty.INT:
        x, y = a.raw, b.raw
        if op == "+":
            return _check_int(x + y)
        if op == "-":
            return _check_int(x - y)
        if op == "*":
            return _check_int(x * y)
        if op in ("/", "%"):
            if y == 0:
                raise EvalError("integer division by zero")
            q = _int_div(x, y)
            if op == "/":
                return _check_int(q)
            return _check_int(x - q * y)
    else:
        x, y = a.raw, b.raw
        if op == "+":
            return double_value(x + y)
        if op == "-":
            return double_value(x - y)
        if op == "*":
            return double_value(x * y)
        if op == "/":
            return double_value(_double_div(x, y))
        if op == "%":
            try:
                return double_value(math.fmod(x, y))
            except ValueError:
                return double_value(math.nan)
    raise EvalError(f"unknown binary operator {op!r}")


# ---------------------------------------------------------------------------
# Program index
# ---------------------------------------------------------------------------


@dataclass
class ProgramIndex:
    """Per-program lookup tables shared by the interpreter operations."""

    root: Component
    nodes: dict[Path, Process]
    bindings: list[tuple[Path, Binding]]
    assignments: list[tuple[Path, Assignment]]
    components: list[tuple[Path, Component]]
    property_tys: dict[Path, Ty]
    spikes: frozenset[Path]
    transients: frozenset[Path]
    permanents: frozenset[Path]

    @property
    def iteration_bound(self) -> int:
        return 3 * len(self.permanents) + len(self.transients) + len(self.property_tys) + 1


def index_program(p: Process) -> ProgramIndex:
    if not isinstance(p, Component):
        raise SmaliteError("a program must be rooted at a component")
    nodes: dict[Path, Process] = {}
    bindings: list[tuple[Path, Binding]] = []
    assignments: list[tuple[Path, Assignment]] = []
    components: list[tuple[Path, Component]] = []
    property_tys: dict[Path, Ty] = {}
    spikes: set[Path] = set()
    transients: set[Path] = set()
    permanents: set[Path] = set()
    for path, node in iter_processes(p):
        nodes[path] = node
        if isinstance(node, Binding):
            bindings.append((path, node))
            permanents.add(path)
        elif isinstance(node, Assignment):
            assignments.append((path, node))
            transients.add(path)
        elif isinstance(node, Component):
            components.append((path, node))
            permanents.add(path)
        elif isinstance(node, Spike):
            spikes.add(path)
            transients.add(path)
        elif isinstance(node, Property):
            property_tys[path] = node.ty
    return ProgramIndex(
        root=p,
        nodes=nodes,
        bindings=bindings,
        assignments=assignments,
        components=components,
        property_tys=property_tys,
        spikes=frozenset(spikes),
        transients=frozenset(transients),
        permanents=frozenset(permanents),
    )


def _parent_active(activ: frozenset[Path], path: Path) -> bool:
    parent = path.parent
    return parent.is_root or parent in activ


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def init_activation(p: Process) -> Activation:
    """Initial activation set: marked-active bindings and components, with an
    active component also contributing its children; a deactivated component's
    subtree is not traversed."""
    out: set[Path] = set()

    def walk(node: Process, root: Path) -> None:
        here = root.child(node.name)
        if isinstance(node, Binding):
            if node.ia is InitActivation.ACTIVE:
                out.add(here)
        elif isinstance(node, Component):
            if node.ia is InitActivation.ACTIVE:
                out.add(here)
                for child in node.children:
                    walk(child, here)

    walk(p, Path(()))
    return frozenset(out)


def init_env(p: Process) -> Environment:
    """Initial environment: a left-to-right fold evaluating each property
    initializer under the accumulated environment (deactivated components
    are traversed too)."""
    env: Environment = {}
    for path, node in iter_processes(p):
        if isinstance(node, Property):
            try:
                env[path] = eval_expr({}, env, node.init)
            except EvalError as exc:
                raise InitError(path, str(exc)) from exc
    return env


def init(p: Process) -> ReactState:
    return ReactState(env=init_env(p), activ=init_activation(p))


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------


def _activation_closure(comp: Component, path: Path) -> Iterator[Path]:
    """Activation propagates only through children marked active."""
    for child in comp.children:
        here = path.child(child.name)
        if isinstance(child, Binding) and child.ia is InitActivation.ACTIVE:
            yield here
        elif isinstance(child, Component) and child.ia is InitActivation.ACTIVE:
            yield here
            yield from _activation_closure(child, here)


def _deactivation_closure(comp: Component, path: Path) -> Iterator[Path]:
    """Deactivation always propagates, whatever the static marks."""
    for child in comp.children:
        here = path.child(child.name)
        if isinstance(child, Binding):
            yield here
        elif isinstance(child, Component):
            yield here
            yield from _deactivation_closure(child, here)


def _lhs_matches(
    lhs: object,
    last_env: Environment,
    env: Environment,
    triggered: set[Path],
    assigned: set[Path],
    activated: set[Path],
    deactivated: set[Path],
) -> bool:
    if isinstance(lhs, TriggerOf):
        return lhs.path in triggered
    if isinstance(lhs, ActivateOf):
        return lhs.path in activated
    if isinstance(lhs, DeactivateOf):
        return lhs.path in deactivated
    if isinstance(lhs, ChangeOf):
        return lhs.path in assigned
    if isinstance(lhs, Cond):
        if not (free_vars(lhs.expr) & assigned):
            return False
        try:
            return eval_expr(last_env, env, lhs.expr) == bool_value(True)
        except EvalError:
            # No rule applies; the safety check reports this case.
            return False
    raise SmaliteError(f"unknown lhs {lhs!r}")


def derive_events(
    idx: ProgramIndex,
    last_env: Environment,
    activ: Activation,
    events: frozenset[Event],
    env: Environment,
    new_activ: Activation,
) -> set[Event]:
    """Every event derivable by one rule application from (state, events)."""
    triggered = {ev.path for ev in events if isinstance(ev, Trigger)}
    assigned = {ev.path for ev in events if isinstance(ev, Assign)}
    activated = {ev.path for ev in events if isinstance(ev, Activate)}
    deactivated = {ev.path for ev in events if isinstance(ev, Deactivate)}
    out: set[Event] = set()

    for path, binding in idx.bindings:
        if path not in new_activ:
            continue
        if not _lhs_matches(
            binding.lhs, last_env, env, triggered, assigned, activated, deactivated
        ):
            continue
        rhs = binding.rhs
        if isinstance(rhs, DoTrigger):
            if _parent_active(new_activ, rhs.path):
                out.add(Trigger(rhs.path))
        elif isinstance(rhs, DoActivate):
            if _parent_active(new_activ, rhs.path) and rhs.path not in activ:
                out.add(Activate(rhs.path))
        elif isinstance(rhs, DoDeactivate):
            if _parent_active(new_activ, rhs.path) and rhs.path in activ:
                out.add(Deactivate(rhs.path))

    for path, assignment in idx.assignments:
        if path not in triggered:
            continue
        if not _parent_active(new_activ, path):
            continue
        if not _parent_active(new_activ, assignment.target):
            continue
        try:
            v = eval_expr(last_env, env, assignment.expr)
        except EvalError as exc:
            raise UnsafeReaction(path, str(exc)) from exc
        out.add(Assign(v, assignment.target))

    for path, comp in idx.components:
        if path in activated:
            for q in _activation_closure(comp, path):
                if q not in activ:
                    out.add(Activate(q))
        if path in deactivated:
            for q in _deactivation_closure(comp, path):
                if q in activ:
                    out.add(Deactivate(q))

    return out


# ---------------------------------------------------------------------------
# Update and safety
# ---------------------------------------------------------------------------


def update_state(
    env: Environment, activ: Activation, events: Iterable[Event]
) -> ReactState:
    assigns: dict[Path, Value] = {}
    acts: set[Path] = set()
    deacts: set[Path] = set()
    for ev in events:
        if isinstance(ev, Assign):
            if ev.path in assigns and assigns[ev.path] != ev.value:
                raise ConflictingAssign(ev.path)
            assigns[ev.path] = ev.value
        elif isinstance(ev, Activate):
            acts.add(ev.path)
        elif isinstance(ev, Deactivate):
            deacts.add(ev.path)
    both = acts & deacts
    if both:
        raise ConflictingActivation(sorted(both)[0])
    new_env = dict(env)
    new_env.update(assigns)
    return ReactState(env=new_env, activ=(activ | acts) - deacts)


def check_safety(
    idx: ProgramIndex,
    last_env: Environment,
    events: frozenset[Event],
    env: Environment,
    new_activ: Activation,
) -> None:
    """Raise UnsafeReaction unless every expression the reaction had to
    evaluate does evaluate (and every evaluated condition is boolean)."""
    triggered = {ev.path for ev in events if isinstance(ev, Trigger)}
    assigned = {ev.path for ev in events if isinstance(ev, Assign)}

    def walk(node: Process, root: Path) -> None:
        here = root.child(node.name)
        if isinstance(node, Assignment):
            if here in triggered:
                try:
                    eval_expr(last_env, env, node.expr)
                except EvalError as exc:
                    raise UnsafeReaction(here, str(exc)) from exc
        elif isinstance(node, Binding):
            if here not in new_activ:
                return
            if isinstance(node.lhs, Cond):
                if not (free_vars(node.lhs.expr) & assigned):
                    return
                try:
                    v = eval_expr(last_env, env, node.lhs.expr)
                except EvalError as exc:
                    raise UnsafeReaction(here, str(exc)) from exc
                if v.ty is not Ty.BOOL:
                    raise UnsafeReaction(here, f"condition evaluated to a {v.ty}")
        elif isinstance(node, Component):
            if here not in new_activ:
                return
            for child in node.children:
                walk(child, here)

    walk(idx.root, Path(()))


# ---------------------------------------------------------------------------
# Reaction
# ---------------------------------------------------------------------------


def admissible_external_events(idx: ProgramIndex, activ: Activation) -> list[Event]:
    """Triggers of transient processes, and typed assigns to properties whose
    parent component is currently active (values left to the caller)."""
    out: list[Event] = [Trigger(q) for q in sorted(idx.transients)]
    out.extend(
        Assign(_default_value(ty), q)
        for q, ty in sorted(idx.property_tys.items())
        if _parent_active(activ, q)
    )
    return out


def _default_value(ty: Ty) -> Value:
    return {
        Ty.INT: int_value(0),
        Ty.DOUBLE: double_value(0.0),
        Ty.BOOL: bool_value(False),
        Ty.STR: str_value(""),
    }[ty]


def _check_admissible(idx: ProgramIndex, activ: Activation, ev: Event) -> None:
    if isinstance(ev, Trigger):
        if ev.path not in idx.transients:
            raise InadmissibleEvent(ev, "not a transient process")
        return
    if isinstance(ev, Assign):
        ty = idx.property_tys.get(ev.path)
        if ty is None:
            raise InadmissibleEvent(ev, "not a property")
        if ev.value.ty is not ty:
            raise InadmissibleEvent(ev, f"property has type {ty}, value is {ev.value.ty}")
        if not _parent_active(activ, ev.path):
            raise InadmissibleEvent(ev, "parent component is not active")
        return
    raise InadmissibleEvent(ev, "external activation changes are not supported")


def react(
    p: "Process | ProgramIndex", state: ReactState, ev0: Event
) -> ReactionOutcome:
    """One reaction: saturate the event set, verify the reaction equation
    under the final state, check safety, and return the new state together
    with the triggered spikes."""
    idx = p if isinstance(p, ProgramIndex) else index_program(p)
    _check_admissible(idx, state.activ, ev0)

    events: frozenset[Event] = frozenset((ev0,))
    bound = idx.iteration_bound
    converged = False
    for _ in range(bound):
        updated = update_state(state.env, state.activ, events)
        fresh = derive_events(
            idx, state.env, state.activ, events, updated.env, updated.activ
        )
        if fresh <= events:
            converged = True
            break
        events = events | fresh
    if not converged:
        raise DivergentReaction(
            f"no fixed point within {bound} iterations ({len(events)} events)"
        )

    final = update_state(state.env, state.activ, events)
    rederived = derive_events(
        idx, state.env, state.activ, events, final.env, final.activ
    )
    if events != (rederived | {ev0}):
        extra = events - (rederived | {ev0})
        detail = ", ".join(sorted(format_event(ev) for ev in extra))
        raise NonCausalReaction(detail)

    check_safety(idx, state.env, events, final.env, final.activ)

    emitted = frozenset(
        ev for ev in events if isinstance(ev, Trigger) and ev.path in idx.spikes
    )
    return ReactionOutcome(state=final, emitted=emitted, events=events)


def run_trace(p: Process, events: Sequence[Event]) -> list[ReactionOutcome]:
    """Initialize, then fold react over the trace. The first outcome is the
    initial state; a failing reaction raises TraceError with its 1-based index
    and the outcomes produced so far."""
    idx = index_program(p)
    outcomes = [ReactionOutcome(state=init(p), emitted=frozenset())]
    state = outcomes[0].state
    for i, ev in enumerate(events, start=1):
        try:
            outcome = react(idx, state, ev)
        except ReactionError as exc:
            raise TraceError(i, exc, outcomes) from exc
        outcomes.append(outcome)
        state = outcome.state
    return outcomes
