"""Event-trace and state-dump text formats.

These are the shared wire formats: the interpreter and the VM must produce
byte-identical dumps for the same program and trace, and both consume the
same trace files.

Trace files: one event per line, `trigger <path>` or `assign <literal> <path>`,
with `#` line comments and blank lines ignored.

Dumps: one block per state, introduced by a `==` header, followed by sorted
`env <path> = <literal>` lines, sorted `active <path>` lines, and (for
reactions) sorted `emit trigger <path>` lines. A failing reaction ends the
stream with `== error <index> <kind>`.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

from .core import (
    Assign,
    Event,
    Path,
    SmaliteError,
    Trigger,
    Value,
    bool_value,
    double_value,
    format_event,
    format_value,
    int_value,
    str_value,
)
from .parser import ParseError, Token, _Parser, tokenize


class TraceFormatError(SmaliteError):
    pass


def _literal_from(p: _Parser) -> Value:
    tok = p.tok
    negative = False
    if p.at_punct("-"):
        p.advance()
        negative = True
        tok = p.tok
    if tok.kind == "int":
        p.advance()
        n = int(tok.text)
        return int_value(-n if negative else n)
    if tok.kind == "float":
        p.advance()
        x = float(tok.text)
        return double_value(-x if negative else x)
    if tok.kind == "ident" and tok.text == "inf":
        p.advance()
        return double_value(-math.inf if negative else math.inf)
    if negative:
        raise TraceFormatError(f"expected a number after '-', got {tok.text!r}")
    if tok.kind == "string":
        p.advance()
        return str_value(tok.text)
    if tok.kind == "ident" and tok.text in ("true", "false"):
        p.advance()
        return bool_value(tok.text == "true")
    if tok.kind == "ident" and tok.text == "nan":
        p.advance()
        return double_value(math.nan)
    raise TraceFormatError(f"expected a value literal, got {tok.text!r}")


def parse_value_literal(text: str) -> Value:
    try:
        p = _Parser(tokenize(text))
    except ParseError as exc:
        raise TraceFormatError(str(exc)) from exc
    v = _literal_from(p)
    if p.tok.kind != "eof":
        raise TraceFormatError(f"trailing input after value literal: {text!r}")
    return v


def parse_trace(text: str) -> list[Event]:
    events: list[Event] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            toks = tokenize(line)
        except ParseError as exc:
            raise TraceFormatError(f"trace line {lineno}: {exc}") from exc
        p = _Parser(toks)
        try:
            if p.tok.kind == "ident" and p.tok.text == "trigger":
                p.advance()
                events.append(Trigger(p.parse_path()))
            elif p.tok.kind == "ident" and p.tok.text == "assign":
                p.advance()
                value = _literal_from(p)
                events.append(Assign(value, p.parse_path()))
            else:
                raise TraceFormatError(
                    f"trace line {lineno}: expected 'trigger' or 'assign'"
                )
            if p.tok.kind != "eof":
                raise TraceFormatError(f"trace line {lineno}: trailing input")
        except (ParseError, ValueError) as exc:
            raise TraceFormatError(f"trace line {lineno}: {exc}") from exc
    return events


def format_trace(events: Iterable[Event]) -> str:
    return "".join(format_event(ev) + "\n" for ev in events)


# ---------------------------------------------------------------------------
# State dumps
# ---------------------------------------------------------------------------


def state_block(
    env: dict[Path, Value],
    active: Iterable[Path],
    emitted: Optional[Iterable[Path]] = None,
) -> list[str]:
    lines = [f"env {path} = {format_value(env[path])}" for path in sorted(env, key=str)]
    lines.extend(f"active {path}" for path in sorted(active, key=str))
    if emitted is not None:
        lines.extend(f"emit trigger {path}" for path in sorted(emitted, key=str))
    return lines


def init_header() -> str:
    return "== init"

def reaction_header(index: int, ev: Event) -> str:
    return f"== reaction {index} {format_event(ev)}"


def error_line(index: "int | str", kind: str) -> str:
    return f"== error {index} {kind}"


def render_dumps(
    blocks: Sequence[tuple[str, list[str]]], error: Optional[str] = None
) -> str:
    """Assemble header/lines blocks (plus an optional final error line)."""
    out: list[str] = []
    for header, lines in blocks:
        out.append(header)
        out.extend(lines)
    if error is not None:
        out.append(error)
    return "\n".join(out) + "\n"
