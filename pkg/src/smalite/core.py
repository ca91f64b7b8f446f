"""Core abstract syntax for Smalite programs.

A program is a tree of processes (properties, spikes, assignments,
bindings, components). In the core form every path is absolute from the
root: the outermost component is rooted at the empty path, so its own
path is just its name. All nodes are immutable and hashable.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class SmaliteError(Exception):
    """Base class for all errors raised by this package."""


@dataclass(frozen=True, order=True)
class Path:
    """Absolute dotted name of a process; the empty path is the root anchor."""

    segments: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for seg in self.segments:
            if not _IDENT_RE.match(seg):
                raise ValueError(f"invalid path segment: {seg!r}")

    @classmethod
    def parse(cls, text: str) -> "Path":
        if text == "":
            return cls(())
        return cls(tuple(text.split(".")))

    def child(self, name: str) -> "Path":
        return Path(self.segments + (name,))

    def join(self, other: "Path") -> "Path":
        return Path(self.segments + other.segments)

    @property
    def parent(self) -> "Path":
        if not self.segments:
            raise ValueError("the root anchor has no parent")
        return Path(self.segments[:-1])

    @property
    def name(self) -> str:
        if not self.segments:
            raise ValueError("the root anchor has no name")
        return self.segments[-1]

    @property
    def is_root(self) -> bool:
        return not self.segments

    def is_prefix_of(self, other: "Path") -> bool:
        return other.segments[: len(self.segments)] == self.segments

    def __str__(self) -> str:
        return ".".join(self.segments)

    def __repr__(self) -> str:
        return f"Path({str(self)!r})"


ROOT = Path(())


class Ty(enum.Enum):
    """Value types: the fixed host-value domain."""

    INT = "Int"
    DOUBLE = "Double"
    BOOL = "Bool"
    STR = "Str"

    def __str__(self) -> str:
        return self.value


# 64-bit signed range; arithmetic outside it is an evaluation error, not wrapping.
INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


@dataclass(frozen=True)
class Value:
    """A runtime value. `raw` is int/float/bool/str matching `ty`.

    Equality is exact for Int/Bool/Str and IEEE for Double (so NaN != NaN);
    values of different types never compare equal.
    """

    ty: Ty
    raw: Union[int, float, bool, str]

    def __post_init__(self) -> None:
        expected = {Ty.INT: int, Ty.DOUBLE: float, Ty.BOOL: bool, Ty.STR: str}[self.ty]
        if type(self.raw) is not expected:
            raise ValueError(f"value {self.raw!r} does not carry type {self.ty}")
        if self.ty is Ty.INT and not (INT_MIN <= self.raw <= INT_MAX):
            raise ValueError(f"integer out of 64-bit range: {self.raw}")

    def __str__(self) -> str:
        return format_value(self)


def int_value(n: int) -> Value:
    return Value(Ty.INT, n)


def double_value(x: float) -> Value:
    return Value(Ty.DOUBLE, float(x))


def bool_value(b: bool) -> Value:
    return Value(Ty.BOOL, bool(b))


def str_value(s: str) -> Value:
    return Value(Ty.STR, s)


TRUE = bool_value(True)
FALSE = bool_value(False)


def escape_str(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20:
            out.append(f"\\x{ord(ch):02x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def format_value(v: Value) -> str:
    """Canonical literal form, used in dumps, traces and pretty-printing."""
    if v.ty is Ty.INT:
        return str(v.raw)
    if v.ty is Ty.DOUBLE:
        return repr(v.raw)
    if v.ty is Ty.BOOL:
        return "true" if v.raw else "false"
    return escape_str(v.raw)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

UNARY_OPS = ("-", "!", "str")
BINARY_OPS = ("+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "||")


class Expr:
    """Base class for expressions."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: Value


@dataclass(frozen=True)
class Var(Expr):
    """Reads the current (post-update) value of a property."""

    path: Path


@dataclass(frozen=True)
class Last(Expr):
    """Reads the value a property had at the end of the previous reaction."""

    path: Path


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


def free_vars(e: Expr) -> frozenset[Path]:
    """All property paths read through `Var` (current-value reads)."""
    if isinstance(e, Var):
        return frozenset((e.path,))
    if isinstance(e, Unary):
        return free_vars(e.operand)
    if isinstance(e, Binary):
        return free_vars(e.left) | free_vars(e.right)
    return frozenset()


def last_vars(e: Expr) -> frozenset[Path]:
    """All property paths read through `last`."""
    if isinstance(e, Last):
        return frozenset((e.path,))
    if isinstance(e, Unary):
        return last_vars(e.operand)
    if isinstance(e, Binary):
        return last_vars(e.left) | last_vars(e.right)
    return frozenset()


_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 4,
    "<=": 4,
    ">": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
    "%": 6,
}


def expr_to_str(e: Expr, parent_prec: int = 0) -> str:
    """Render with minimal parentheses; binary operators are left-associative."""
    if isinstance(e, Const):
        return format_value(e.value)
    if isinstance(e, Var):
        return str(e.path)
    if isinstance(e, Last):
        return f"last {e.path}"
    if isinstance(e, Unary):
        if e.op == "str":
            return f"str({expr_to_str(e.operand)})"
        inner = expr_to_str(e.operand, 7)
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        prec = _PRECEDENCE[e.op]
        text = f"{expr_to_str(e.left, prec)} {e.op} {expr_to_str(e.right, prec + 1)}"
        if prec < parent_prec:
            return f"({text})"
        return text
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------


class Event:
    """Base class for reaction events."""

    __slots__ = ()


@dataclass(frozen=True)
class Trigger(Event):
    path: Path


@dataclass(frozen=True)
class Assign(Event):
    value: Value
    path: Path


@dataclass(frozen=True)
class Activate(Event):
    path: Path


@dataclass(frozen=True)
class Deactivate(Event):
    path: Path


def format_event(ev: Event) -> str:
    if isinstance(ev, Trigger):
        return f"trigger {ev.path}"
    if isinstance(ev, Assign):
        return f"assign {format_value(ev.value)} {ev.path}"
    if isinstance(ev, Activate):
        return f"activate {ev.path}"
    if isinstance(ev, Deactivate):
        return f"deactivate {ev.path}"
    raise TypeError(f"not an event: {ev!r}")


# ---------------------------------------------------------------------------
# Binding sides
# ---------------------------------------------------------------------------


class Lhs:
    __slots__ = ()


@dataclass(frozen=True)
class TriggerOf(Lhs):
    path: Path


@dataclass(frozen=True)
class ActivateOf(Lhs):
    path: Path


@dataclass(frozen=True)
class DeactivateOf(Lhs):
    path: Path


@dataclass(frozen=True)
class ChangeOf(Lhs):
    path: Path


@dataclass(frozen=True)
class Cond(Lhs):
    expr: Expr


class Rhs:
    __slots__ = ()


@dataclass(frozen=True)
class DoTrigger(Rhs):
    path: Path


@dataclass(frozen=True)
class DoActivate(Rhs):
    path: Path


@dataclass(frozen=True)
class DoDeactivate(Rhs):
    path: Path


def lhs_to_str(lhs: Lhs) -> str:
    if isinstance(lhs, TriggerOf):
        return f"T?({lhs.path})"
    if isinstance(lhs, ActivateOf):
        return f"A?({lhs.path})"
    if isinstance(lhs, DeactivateOf):
        return f"D?({lhs.path})"
    if isinstance(lhs, ChangeOf):
        return f"C?({lhs.path})"
    if isinstance(lhs, Cond):
        return f"({expr_to_str(lhs.expr)})?"
    raise TypeError(f"not a binding lhs: {lhs!r}")


def rhs_to_str(rhs: Rhs) -> str:
    if isinstance(rhs, DoTrigger):
        return f"T!({rhs.path})"
    if isinstance(rhs, DoActivate):
        return f"A!({rhs.path})"
    if isinstance(rhs, DoDeactivate):
        return f"D!({rhs.path})"
    raise TypeError(f"not a binding rhs: {rhs!r}")


# ---------------------------------------------------------------------------
# Processes
# ---------------------------------------------------------------------------


class InitActivation(enum.Enum):
    ACTIVE = "a"
    INACTIVE = "d"

    def __str__(self) -> str:
        return self.value


class Process:
    """Base class for core processes. Every node carries its own name."""

    __slots__ = ()

    name: str


@dataclass(frozen=True)
class Property(Process):
    name: str
    ty: Ty
    init: Expr


@dataclass(frozen=True)
class Spike(Process):
    name: str


@dataclass(frozen=True)
class Assignment(Process):
    name: str
    expr: Expr
    target: Path


@dataclass(frozen=True)
class Binding(Process):
    name: str
    lhs: Lhs
    ia: InitActivation
    rhs: Rhs


@dataclass(frozen=True)
class Component(Process):
    ia: InitActivation
    name: str
    children: tuple[Process, ...] = ()


class Kind(enum.Enum):
    TRANSIENT = "transient"
    PERMANENT = "permanent"
    PROPERTY = "property"


def classify(p: Process) -> Kind:
    """Transient processes do not retain activation between reactions."""
    if isinstance(p, (Spike, Assignment)):
        return Kind.TRANSIENT
    if isinstance(p, (Binding, Component)):
        return Kind.PERMANENT
    if isinstance(p, Property):
        return Kind.PROPERTY
    raise TypeError(f"not a process: {p!r}")


def iter_processes(p: Process, root: Path = ROOT) -> Iterator[tuple[Path, Process]]:
    """Yield (absolute path, process) for every node, in document order."""
    here = root.child(p.name)
    yield here, p
    if isinstance(p, Component):
        for child in p.children:
            yield from iter_processes(child, here)


def lookup(p: Process, target: Path) -> Optional[Process]:
    """Return the process rooted at `target` in the tree rooted at the empty path."""
    if target.is_root:
        return None
    if p.name != target.segments[0]:
        return None
    node: Process = p
    for seg in target.segments[1:]:
        if not isinstance(node, Component):
            return None
        for child in node.children:
            if child.name == seg:
                node = child
                break
        else:
            return None
    return node


def property_paths(p: Process) -> list[Path]:
    return [q for q, n in iter_processes(p) if isinstance(n, Property)]


def permanent_paths(p: Process) -> list[Path]:
    return [q for q, n in iter_processes(p) if classify(n) is Kind.PERMANENT]


def transient_paths(p: Process) -> list[Path]:
    return [q for q, n in iter_processes(p) if classify(n) is Kind.TRANSIENT]


def spike_paths(p: Process) -> list[Path]:
    return [q for q, n in iter_processes(p) if isinstance(n, Spike)]


def property_types(p: Process) -> dict[Path, Ty]:
    return {q: n.ty for q, n in iter_processes(p) if isinstance(n, Property)}


# ---------------------------------------------------------------------------
# Canonical textual dump
# ---------------------------------------------------------------------------


def dump_core(p: Process) -> str:
    """Deterministic textual form of a core AST.

    The output re-parses (see parser.parse_core) to a structurally equal
    tree; golden tests rely on it being byte-stable.
    """
    lines: list[str] = []
    _dump_into(p, 0, lines)
    return "\n".join(lines) + "\n"


def _dump_into(p: Process, depth: int, lines: list[str]) -> None:
    pad = "  " * depth
    if isinstance(p, Property):
        lines.append(f"{pad}property<{p.ty}> {p.name} : {expr_to_str(p.init)};")
    elif isinstance(p, Spike):
        lines.append(f"{pad}spike {p.name};")
    elif isinstance(p, Assignment):
        lines.append(f"{pad}assign {p.name} : {expr_to_str(p.expr)} =: {p.target};")
    elif isinstance(p, Binding):
        lines.append(
            f"{pad}binding<{p.ia}> {p.name} : {lhs_to_str(p.lhs)} -> {rhs_to_str(p.rhs)};"
        )
    elif isinstance(p, Component):
        if not p.children:
            lines.append(f"{pad}component<{p.ia}> {p.name} {{}}")
            return
        lines.append(f"{pad}component<{p.ia}> {p.name} {{")
        for child in p.children:
            _dump_into(child, depth + 1, lines)
        lines.append(f"{pad}}}")
    else:
        raise TypeError(f"not a process: {p!r}")
