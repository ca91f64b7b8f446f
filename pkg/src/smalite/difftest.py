"""Random program/trace generation and the interpreter-vs-VM differential
harness.

Generated programs are drawn from a restricted, always-schedulable shape and
then filtered through the full static analysis (rejection sampling), so every
emitted program passes all checks. The restrictions that matter:

  * activation targets (A!/D!) are components containing only properties, so
    activation changes never enable or disable other instructions mid-chain;
  * assignment expressions read only `last` values and literals, so their
    results cannot depend on saturation order;
  * condition expressions compare a single currently-assigned variable with
    a literal, so a condition's truth is fixed once its producer has run;
  * externally assigned properties live in never-deactivated components, so
    trace events stay admissible regardless of reached state.

Together these exclude the non-causal and conflicting corner cases that the
exact fixed-point semantics rejects, which is what makes a 100% PASS rate a
meaningful target rather than an aspiration.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape

from .analysis import check_all, has_errors
from .core import (
    Assign,
    Assignment,
    Binary,
    Binding,
    Component,
    Cond,
    Const,
    DoActivate,
    DoDeactivate,
    DoTrigger,
    Event,
    Expr,
    InitActivation,
    Last,
    Path,
    Process,
    Property,
    SmaliteError,
    Spike,
    Trigger,
    TriggerOf,
    ChangeOf,
    ActivateOf,
    DeactivateOf,
    Ty,
    Value,
    bool_value,
    double_value,
    dump_core,
    int_value,
    str_value,
)
from .compiler import IrObject
from .pipeline import compile_ir, interp_dumps, vm_dumps
from .semantics import (
    Activate,
    Deactivate,
    TraceError,
    derive_events,
    index_program,
    run_trace,
    update_state,
)


class GenExhausted(SmaliteError):
    pass


@dataclass
class GenConfig:
    seed: int = 0
    n_properties: int = 5
    n_spikes: int = 3
    n_assignments: int = 4
    n_bindings: int = 6
    n_switch_components: int = 2
    max_trace_len: int = 10
    int_bound: int = 50
    retries: int = 200


_WORDS = ["lo", "hi", "mid", "on", "off", "red", "blue"]


def _literal(rng: random.Random, ty: Ty, cfg: GenConfig) -> Value:
    if ty is Ty.INT:
        return int_value(rng.randint(-cfg.int_bound, cfg.int_bound))
    if ty is Ty.DOUBLE:
        return double_value(rng.randint(-4 * cfg.int_bound, 4 * cfg.int_bound) / 4.0)
    if ty is Ty.BOOL:
        return bool_value(rng.random() < 0.5)
    return str_value(rng.choice(_WORDS))


def _assign_expr(rng: random.Random, target: Path, ty: Ty, cfg: GenConfig) -> Expr:
    """`last`-and-literal expressions only: saturation-order independent."""
    roll = rng.random()
    if roll < 0.3:
        return Const(_literal(rng, ty, cfg))
    if ty is Ty.INT:
        if roll < 0.6:
            return Binary("+", Last(target), Const(int_value(rng.randint(-3, 3))))
        if roll < 0.8:
            return Binary("-", Const(int_value(rng.randint(-3, 3))), Last(target))
        return Binary("*", Last(target), Const(int_value(rng.choice([-1, 2, 3]))))
    if ty is Ty.DOUBLE:
        if roll < 0.7:
            return Binary("+", Last(target), Const(double_value(0.5)))
        return Binary("/", Last(target), Const(double_value(2.0)))
    if ty is Ty.BOOL:
        from .core import Unary

        return Unary("!", Last(target))
    return Binary("+", Last(target), Const(str_value(rng.choice(_WORDS))))


def _cond_expr(rng: random.Random, var: Path, ty: Ty, cfg: GenConfig) -> Expr:
    from .core import Var

    if ty is Ty.BOOL:
        return Var(var) if rng.random() < 0.5 else Binary("==", Var(var), Const(bool_value(False)))
    op = rng.choice(["==", "!=", "<", "<=", ">", ">="] if ty in (Ty.INT, Ty.DOUBLE) else ["==", "!="])
    return Binary(op, Var(var), Const(_literal(rng, ty, cfg)))


def _gen_candidate(rng: random.Random, cfg: GenConfig) -> Process:
    children: list[Process] = []
    prop_tys: dict[str, Ty] = {}
    tys = [Ty.INT, Ty.INT, Ty.BOOL, Ty.STR, Ty.DOUBLE]
    for i in range(cfg.n_properties):
        ty = rng.choice(tys)
        name = f"p{i}"
        prop_tys[name] = ty
        children.append(Property(name, ty, Const(_literal(rng, ty, cfg))))
    spike_names = [f"s{i}" for i in range(cfg.n_spikes)]
    children.extend(Spike(n) for n in spike_names)

    # Switchable zones: property-only components toggled by A!/D!.
    switch_names = []
    for i in range(cfg.n_switch_components):
        name = f"z{i}"
        switch_names.append(name)
        ia = InitActivation.ACTIVE if rng.random() < 0.5 else InitActivation.INACTIVE
        zprops = [
            Property("v", Ty.INT, Const(int_value(rng.randint(0, 9)))),
        ]
        children.append(Component(ia, name, tuple(zprops)))

    assign_names = []
    assign_targets: dict[str, str] = {}
    prop_names = list(prop_tys)
    for i in range(cfg.n_assignments):
        name = f"a{i}"
        target = rng.choice(prop_names)
        assign_names.append(name)
        assign_targets[name] = target
        tpath = Path(("root", target))
        children.append(
            Assignment(name, _assign_expr(rng, tpath, prop_tys[target], cfg), tpath)
        )

    transients = spike_names + assign_names
    for i in range(cfg.n_bindings):
        name = f"b{i}"
        roll = rng.random()
        if roll < 0.45:
            src = rng.choice(transients)
            lhs = TriggerOf(Path(("root", src)))
        elif roll < 0.65:
            target = rng.choice(prop_names)
            lhs = ChangeOf(Path(("root", target)))
        elif roll < 0.85:
            var = rng.choice(prop_names)
            lhs = Cond(_cond_expr(rng, Path(("root", var)), prop_tys[var], cfg))
        elif roll < 0.95 and switch_names:
            lhs = ActivateOf(Path(("root", rng.choice(switch_names))))
        else:
            lhs = DeactivateOf(Path(("root", rng.choice(switch_names or spike_names))))
            if not switch_names:
                lhs = TriggerOf(Path(("root", rng.choice(transients))))
        roll = rng.random()
        if roll < 0.6 or not switch_names:
            rhs = DoTrigger(Path(("root", rng.choice(transients))))
        elif roll < 0.8:
            rhs = DoActivate(Path(("root", rng.choice(switch_names))))
        else:
            rhs = DoDeactivate(Path(("root", rng.choice(switch_names))))
        ia = InitActivation.ACTIVE if rng.random() < 0.9 else InitActivation.INACTIVE
        children.append(Binding(name, lhs, ia, rhs))

    return Component(InitActivation.ACTIVE, "root", tuple(children))


def gen_program(cfg: GenConfig, rng: Optional[random.Random] = None) -> tuple[Process, int]:
    """Rejection-sample until the analysis accepts; returns (program, rejected
    count) so callers can report the acceptance rate."""
    rng = rng or random.Random(cfg.seed)
    rejected = 0
    for _ in range(cfg.retries):
        p = _gen_candidate(rng, cfg)
        _, diags = check_all(p)
        if not has_errors(diags):
            return p, rejected
        rejected += 1
    raise GenExhausted(f"no accepted program within {cfg.retries} attempts")


def gen_trace(p: Process, cfg: GenConfig, rng: Optional[random.Random] = None) -> list[Event]:
    """Admissible-by-construction events: any transient trigger; typed assigns
    to root-level properties (the root is never deactivated)."""
    rng = rng or random.Random(cfg.seed)
    idx = index_program(p)
    transients = sorted(idx.transients)
    root_props = sorted(q for q in idx.property_tys if len(q.segments) == 2)
    events: list[Event] = []
    for _ in range(rng.randint(0, cfg.max_trace_len)):
        if root_props and rng.random() < 0.3:
            q = rng.choice(root_props)
            events.append(Assign(_literal(rng, idx.property_tys[q], cfg), q))
        elif transients:
            events.append(Trigger(rng.choice(transients)))
    return events


# ---------------------------------------------------------------------------
# Differential run
# ---------------------------------------------------------------------------


@dataclass
class Verdict:
    passed: bool
    detail: str = ""
    program_dump: str = ""
    trace: tuple[Event, ...] = ()
    interp: str = ""
    vm: str = ""


def _assert_invariants(p: Process, events: Sequence[Event]) -> Optional[str]:
    """Interpreter-side invariants over one trace; returns a violation note."""
    idx = index_program(p)
    try:
        outcomes = run_trace(p, events)
        failed_at = None
    except TraceError as exc:
        outcomes = exc.outcomes
        failed_at = exc.index
    keys = set(outcomes[0].state.env)
    prev = outcomes[0].state
    for i, o in enumerate(outcomes[1:], start=1):
        if set(o.state.env) != keys:
            return f"reaction {i}: environment keys changed"
        if not o.state.activ <= idx.permanents:
            return f"reaction {i}: activation outside permanent paths"
        for ev in o.events:
            if isinstance(ev, Activate) and ev.path in prev.activ:
                return f"reaction {i}: no-op Activate {ev.path}"
            if isinstance(ev, Deactivate) and ev.path not in prev.activ:
                return f"reaction {i}: no-op Deactivate {ev.path}"
        final = update_state(prev.env, prev.activ, o.events)
        rederived = derive_events(
            idx, prev.env, prev.activ, o.events, final.env, final.activ
        )
        ev0 = events[i - 1]
        if o.events != (rederived | {ev0}):
            return f"reaction {i}: event set is not the reaction fixed point"
        prev = o.state
    del failed_at
    return None


def diff_run(p: Process, trace: Sequence[Event], ir: Optional[IrObject] = None) -> Verdict:
    """PASS iff interpreter and VM dumps are byte-identical (including any
    failure index and kind) and the semantic invariants hold; on FAIL the
    verdict carries a shrunk counterexample."""
    violation = _assert_invariants(p, trace)
    if violation is None:
        a = interp_dumps(p, trace)
        a2 = interp_dumps(p, trace)
        if a != a2:
            violation = "interpreter is not deterministic"
    if violation is not None:
        return Verdict(False, violation, dump_core(p), tuple(trace))

    ir = ir if ir is not None else compile_ir(p)
    b = vm_dumps(ir, trace)
    a = interp_dumps(p, trace)
    if a == b:
        return Verdict(True)

    # Shrink: shortest failing trace prefix, then drop removable processes.
    trace = list(trace)
    for n in range(len(trace) + 1):
        prefix = trace[:n]
        if interp_dumps(p, prefix) != vm_dumps(ir, prefix):
            trace = prefix
            break
    p = _shrink_program(p, trace)
    ir2 = compile_ir(p, force=True)
    return Verdict(
        False,
        "interpreter and VM dumps differ",
        dump_core(p),
        tuple(trace),
        interp_dumps(p, trace),
        vm_dumps(ir2, trace),
    )


def _still_fails(p: Process, trace: Sequence[Event]) -> bool:
    try:
        ir = compile_ir(p, force=True)
        return interp_dumps(p, trace) != vm_dumps(ir, trace)
    except SmaliteError:
        return False


def _shrink_program(p: Process, trace: Sequence[Event]) -> Process:
    changed = True
    while changed:
        changed = False
        assert isinstance(p, Component)
        for i in range(len(p.children)):
            candidate = Component(
                p.ia, p.name, p.children[:i] + p.children[i + 1 :]
            )
            try:
                index_program(candidate)
            except Exception:
                continue
            if _still_fails(candidate, trace):
                p = candidate
                changed = True
                break
    return p


# ---------------------------------------------------------------------------
# Campaign driver
# ---------------------------------------------------------------------------


@dataclass
class CampaignResult:
    total: int
    passed: int
    rejected: int
    failures: list[Verdict] = field(default_factory=list)

    @property
    def acceptance_rate(self) -> float:
        attempts = self.total + self.rejected
        return self.total / attempts if attempts else 1.0


def run_campaign(seed: int, count: int, cfg: Optional[GenConfig] = None) -> CampaignResult:
    cfg = cfg or GenConfig()
    rng = random.Random(seed)
    result = CampaignResult(total=0, passed=0, rejected=0)
    for _ in range(count):
        p, rejected = gen_program(cfg, rng)
        result.rejected += rejected
        trace = gen_trace(p, cfg, rng)
        verdict = diff_run(p, trace)
        result.total += 1
        if verdict.passed:
            result.passed += 1
        else:
            result.failures.append(verdict)
    return result


def junit_xml(result: CampaignResult, seed: int) -> str:
    lines = [
        '<?xml version="1.0" encoding="utf-8"?>',
        f'<testsuite name="smalite-difftest-seed-{seed}" tests="{result.total}"'
        f' failures="{len(result.failures)}">',
    ]
    lines.append(
        f'  <testcase name="pairs-passed-{result.passed}-of-{result.total}"/>'
    )
    for i, v in enumerate(result.failures):
        lines.append(f'  <testcase name="failure-{i}">')
        body = (
            f"{v.detail}\n--- program ---\n{v.program_dump}"
            f"--- trace ---\n" + "\n".join(str(e) for e in v.trace)
        )
        lines.append(f'    <failure message="{escape(v.detail)}">{escape(body)}</failure>')
        lines.append("  </testcase>")
    lines.append("</testsuite>")
    return "\n".join(lines) + "\n"
