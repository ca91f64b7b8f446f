"""Shared orchestration: source → checked program → dumps/IR/C/DOT.

Both user-facing layers (the CLI and the HTTP service) are thin clients of
this module, so their outputs agree by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .analysis import Diagnostic, PropGraph, check_all, has_errors
from .cgen import emit_c
from .compiler import IrObject, compile_program, dump_ir
from .core import Event, Path, Process, SmaliteError, Value
from .elaborate import elaborate
from .formats import (
    error_line,
    init_header,
    reaction_header,
    render_dumps,
    state_block,
)
from .semantics import (
    InitError,
    ReactState,
    ReactionError,
    TraceError,
    index_program,
    init,
    react,
    run_trace,
)
from .vm import vm_run_trace


class CheckFailure(SmaliteError):
    def __init__(self, diags: Sequence[Diagnostic]):
        self.diags = list(diags)
        super().__init__("; ".join(str(d) for d in diags if d.severity == "error"))


def load(source: str) -> Process:
    return elaborate(source)


def analyze(p: Process, prune: bool = True) -> tuple[PropGraph, list[Diagnostic]]:
    return check_all(p, prune=prune)


def compile_ir(p: Process, prune: bool = True, force: bool = False) -> IrObject:
    """Check then compile. `force` skips the gate on diagnostics; it exists
    for tests that exercise the dynamic counterparts of the static checks."""
    g, diags = analyze(p, prune=prune)
    if not force and has_errors(diags):
        raise CheckFailure(diags)
    return compile_program(p, g)


def compile_c(p: Process, prune: bool = True, force: bool = False) -> str:
    return emit_c(compile_ir(p, prune=prune, force=force))


def diagnostic_lines(diags: Sequence[Diagnostic]) -> list[str]:
    out = []
    for d in diags:
        prefix = "warning: " if d.severity == "warning" else ""
        out.append(prefix + str(d))
    return out


# ---------------------------------------------------------------------------
# Dump rendering (shared by interpreter and VM outputs)
# ---------------------------------------------------------------------------

Normalized = tuple[dict, frozenset, frozenset]  # env, active, emitted paths


def _norm_interp(o) -> Normalized:
    return (o.state.env, o.state.activ, frozenset(t.path for t in o.emitted))


def _norm_vm(o) -> Normalized:
    return (o.fields, o.active, o.emitted)


def _render(
    outcomes: Sequence[Normalized],
    events: Sequence[Event],
    error: Optional[tuple] = None,  # (index-or-'init', kind)
) -> str:
    blocks: list[tuple[str, list[str]]] = []
    if outcomes:
        env, active, _ = outcomes[0]
        blocks.append((init_header(), state_block(env, active)))
        for i, (norm, ev) in enumerate(zip(outcomes[1:], events), start=1):
            env, active, emitted = norm
            blocks.append((reaction_header(i, ev), state_block(env, active, emitted)))
    err = error_line(*error) if error else None
    return render_dumps(blocks, err)


def _dumps(run: Callable[[], list], norm, events: Sequence[Event]) -> str:
    try:
        outcomes = run()
    except InitError:
        return _render([], events, error=("init", "init"))
    except TraceError as exc:
        return _render(
            [norm(o) for o in exc.outcomes], events, error=(exc.index, exc.cause.kind)
        )
    return _render([norm(o) for o in outcomes], events)


def interp_dumps(p: Process, events: Sequence[Event]) -> str:
    return _dumps(lambda: run_trace(p, events), _norm_interp, events)


def vm_dumps(ir: IrObject, events: Sequence[Event]) -> str:
    return _dumps(lambda: vm_run_trace(ir, events), _norm_vm, events)


def graph_dot(p: Process, prune: bool = True) -> str:
    g, _ = analyze(p, prune=prune)
    return g.to_dot()


# ---------------------------------------------------------------------------
# Interactive stepping (REPL and service sessions)
# ---------------------------------------------------------------------------


@dataclass
class Session:
    """Stateful reference-interpreter session. A failed reaction reports its
    error and leaves the state unchanged."""

    p: Process
    state: ReactState = None  # type: ignore[assignment]
    index: int = 0

    def __post_init__(self):
        self._idx = index_program(self.p)
        if self.state is None:
            self.state = init(self.p)

    def initial_dump(self) -> str:
        return render_dumps(
            [(init_header(), state_block(self.state.env, self.state.activ))]
        )

    def step(self, ev: Event) -> str:
        self.index += 1
        try:
            outcome = react(self._idx, self.state, ev)
        except ReactionError as exc:
            return render_dumps([], error_line(self.index, exc.kind))
        self.state = outcome.state
        block = state_block(
            outcome.state.env,
            outcome.state.activ,
            [t.path for t in outcome.emitted],
        )
        return render_dumps([(reaction_header(self.index, ev), block)])
