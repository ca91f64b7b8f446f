"""Elaboration of a surface tree into the core AST.

Three passes: fill in anonymous names with globally unique identifiers,
expand graphical components into generic components with their parameter
properties and predefined spikes, then resolve relative paths lexically,
type-check every expression, and classify binding sides against their
resolved targets.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from . import parser as sp
from .core import (
    ActivateOf,
    Assignment,
    Binary,
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
    Kind,
    Last,
    Lhs,
    Path,
    Process,
    Property,
    Rhs,
    SmaliteError,
    Spike,
    TriggerOf,
    Ty,
    Unary,
    Var,
    classify,
)

Loc = sp.Loc


class ElabError(SmaliteError):
    def __init__(self, message: str, loc: Optional[Loc] = None):
        super().__init__(f"{loc}: {message}" if loc else message)
        self.loc = loc


# Graphical expansion table: kind -> (parameter (name, type) list, predefined spikes).
GRAPHICAL_TABLE: dict[str, tuple[tuple[tuple[str, Ty], ...], tuple[str, ...]]] = {
    "Frame": ((("title", Ty.STR), ("width", Ty.INT), ("height", Ty.INT)), ("close",)),
    "Rectangle": (
        (("x", Ty.INT), ("y", Ty.INT), ("width", Ty.INT), ("height", Ty.INT)),
        ("press", "release"),
    ),
    "FillColor": ((("red", Ty.INT), ("green", Ty.INT), ("blue", Ty.INT)), ()),
    "Text": ((("text", Ty.STR), ("x", Ty.INT), ("y", Ty.INT)), ()),
    "Font": ((("family", Ty.STR), ("size", Ty.INT)), ()),
    "Exit": ((("code", Ty.INT),), ("trigger",)),
}


def _node_name(node: sp.SurfaceProcess) -> Optional[str]:
    return getattr(node, "name", None)


def _all_names(node: sp.SurfaceProcess, acc: set[str]) -> None:
    name = _node_name(node)
    if name:
        acc.add(name)
    if isinstance(node, sp.SComponent):
        for child in node.children:
            _all_names(child, acc)


# ---------------------------------------------------------------------------
# Pass 1: name elaboration
# ---------------------------------------------------------------------------


class _FreshNames:
    def __init__(self, taken: set[str]):
        self.taken = taken
        self.counter = 0

    def fresh(self) -> str:
        while True:
            name = f"_g{self.counter}"
            self.counter += 1
            if name not in self.taken:
                self.taken.add(name)
                return name


def elaborate_names(tree: sp.SComponent) -> sp.SComponent:
    """Replace every anonymous name with a fresh `_gN`, in pre-order."""
    taken: set[str] = set()
    _all_names(tree, taken)
    fresh = _FreshNames(taken)
    named = _fill_names(tree, fresh)
    _check_sibling_names(named)
    return named


def _fill_names(node: sp.SurfaceProcess, fresh: _FreshNames) -> sp.SurfaceProcess:
    if isinstance(node, sp.SComponent):
        name = node.name if node.name is not None else fresh.fresh()
        children = tuple(_fill_names(c, fresh) for c in node.children)
        return replace(node, name=name, children=children)
    if isinstance(node, sp.SBinding) and node.name is None:
        return replace(node, name=fresh.fresh())
    return node


def _check_sibling_names(node: sp.SurfaceProcess) -> None:
    if not isinstance(node, sp.SComponent):
        return
    seen: dict[str, Loc] = {}
    for child in node.children:
        name = _node_name(child)
        assert name is not None
        if name in seen:
            raise ElabError(
                f"duplicate sibling name {name!r} (first declared at {seen[name]})",
                child.loc,
            )
        seen[name] = child.loc
        _check_sibling_names(child)


# ---------------------------------------------------------------------------
# Pass 2: graphical expansion
# ---------------------------------------------------------------------------


def expand_graphical(tree: sp.SComponent) -> sp.SComponent:
    """Rewrite graphical kinds to generic components with parameter
    properties (in table order) and predefined spikes ahead of user children."""
    expanded = _expand(tree)
    _check_sibling_names(expanded)
    return expanded


def _expand(node: sp.SurfaceProcess) -> sp.SurfaceProcess:
    if not isinstance(node, sp.SComponent):
        return node
    children = tuple(_expand(c) for c in node.children)
    if node.kind == "Component":
        if node.args:
            raise ElabError("a generic component takes no parameters", node.loc)
        return replace(node, children=children)
    params, spikes = GRAPHICAL_TABLE[node.kind]
    if len(node.args) != len(params):
        raise ElabError(
            f"{node.kind} takes {len(params)} parameter(s), got {len(node.args)}",
            node.loc,
        )
    prelude: list[sp.SurfaceProcess] = [
        sp.SProperty(pname, pty, arg, node.loc)
        for (pname, pty), arg in zip(params, node.args)
    ]
    prelude.extend(sp.SSpike(s, node.loc) for s in spikes)
    return sp.SComponent(
        "Component", node.ia, node.name, (), tuple(prelude) + children, node.loc
    )


# ---------------------------------------------------------------------------
# Pass 3: resolution, type checking, classification
# ---------------------------------------------------------------------------


@dataclass
class _Scope:
    """One lexical level: the children of an enclosing component."""

    path: Path
    names: dict[str, Path]


class _Resolver:
    def __init__(self, tree: sp.SComponent):
        self.tree = tree
        self.index: dict[Path, sp.SurfaceProcess] = {}
        self._build_index(tree, Path(()))
        self.prop_types: dict[Path, Ty] = {
            p: n.ty for p, n in self.index.items() if isinstance(n, sp.SProperty)
        }
        # Document-order position of each property, for initializer ordering.
        self.prop_order: dict[Path, int] = {}
        for i, (p, n) in enumerate(self.index.items()):
            if isinstance(n, sp.SProperty):
                self.prop_order[p] = i
        self.scopes: list[_Scope] = [
            _Scope(Path(()), {tree.name: Path((tree.name,))})
        ]

    def _build_index(self, node: sp.SurfaceProcess, root: Path) -> None:
        name = _node_name(node)
        assert name is not None, "resolution requires elaborated names"
        here = root.child(name)
        if here in self.index:
            raise ElabError(f"duplicate path {here}", node.loc)
        self.index[here] = node
        if isinstance(node, sp.SComponent):
            for child in node.children:
                self._build_index(child, here)

    # -- path resolution ---------------------------------------------------

    def resolve_path(self, path: Path, loc: Loc) -> Path:
        head = path.segments[0]
        for scope in reversed(self.scopes):
            if head in scope.names:
                resolved = scope.names[head]
                break
        else:
            raise ElabError(f"unresolved name {head!r}", loc)
        for seg in path.segments[1:]:
            resolved = resolved.child(seg)
            if resolved not in self.index:
                raise ElabError(f"unresolved path {resolved}", loc)
        return resolved

    def kind_of(self, path: Path) -> Kind:
        node = self.index[path]
        if isinstance(node, (sp.SSpike, sp.SAssignment)):
            return Kind.TRANSIENT
        if isinstance(node, (sp.SBinding, sp.SComponent)):
            return Kind.PERMANENT
        return Kind.PROPERTY

    # -- expressions ---------------------------------------------------------

    def resolve_expr(self, e: Expr, loc: Loc, allow_last: bool) -> tuple[Expr, Ty]:
        if isinstance(e, Const):
            return e, e.value.ty
        if isinstance(e, Var):
            target = self.resolve_path(e.path, loc)
            ty = self.prop_types.get(target)
            if ty is None:
                raise ElabError(f"{target} is not a property", loc)
            return Var(target), ty
        if isinstance(e, Last):
            if not allow_last:
                raise ElabError("'last' is not allowed here", loc)
            target = self.resolve_path(e.path, loc)
            ty = self.prop_types.get(target)
            if ty is None:
                raise ElabError(f"'last' of {target}, which is not a property", loc)
            return Last(target), ty
        if isinstance(e, Unary):
            inner, ity = self.resolve_expr(e.operand, loc, allow_last)
            if e.op == "-":
                if ity not in (Ty.INT, Ty.DOUBLE):
                    raise ElabError(f"unary '-' needs a numeric operand, got {ity}", loc)
                return Unary("-", inner), ity
            if e.op == "!":
                if ity is not Ty.BOOL:
                    raise ElabError(f"'!' needs a Bool operand, got {ity}", loc)
                return Unary("!", inner), Ty.BOOL
            if e.op == "str":
                return Unary("str", inner), Ty.STR
            raise ElabError(f"unknown unary operator {e.op!r}", loc)
        if isinstance(e, Binary):
            left, lty = self.resolve_expr(e.left, loc, allow_last)
            right, rty = self.resolve_expr(e.right, loc, allow_last)
            ty = self._binary_type(e.op, lty, rty, loc)
            return Binary(e.op, left, right), ty
        raise ElabError(f"unsupported expression node {e!r}", loc)

    def _binary_type(self, op: str, lty: Ty, rty: Ty, loc: Loc) -> Ty:
        def fail() -> ElabError:
            return ElabError(f"operator {op!r} cannot combine {lty} and {rty}", loc)

        if op in ("&&", "||"):
            if lty is Ty.BOOL and rty is Ty.BOOL:
                return Ty.BOOL
            raise fail()
        if op in ("==", "!="):
            if lty is rty:
                return Ty.BOOL
            raise fail()
        if op in ("<", "<=", ">", ">="):
            if lty is rty and lty in (Ty.INT, Ty.DOUBLE):
                return Ty.BOOL
            raise fail()
        if op == "+":
            if lty is Ty.STR and rty is Ty.STR:
                return Ty.STR
            if lty is rty and lty in (Ty.INT, Ty.DOUBLE):
                return lty
            raise fail()
        if op in ("-", "*", "/", "%"):
            if lty is rty and lty in (Ty.INT, Ty.DOUBLE):
                return lty
            raise fail()
        raise ElabError(f"unknown binary operator {op!r}", loc)

    # -- processes -----------------------------------------------------------

    def resolve(self) -> Component:
        root = self._resolve_node(self.tree, Path(()))
        assert isinstance(root, Component)
        self._check_initializer_order(root)
        return root

    def _resolve_node(self, node: sp.SurfaceProcess, root: Path) -> Process:
        if isinstance(node, sp.SComponent):
            here = root.child(node.name)  # type: ignore[arg-type]
            scope = _Scope(
                here,
                {c.name: here.child(c.name) for c in node.children},  # type: ignore[misc]
            )
            self.scopes.append(scope)
            try:
                children = tuple(self._resolve_node(c, here) for c in node.children)
            finally:
                self.scopes.pop()
            return Component(node.ia, node.name, children)  # type: ignore[arg-type]
        if isinstance(node, sp.SProperty):
            init, ity = self.resolve_expr(node.init, node.loc, allow_last=False)
            if ity is not node.ty:
                raise ElabError(
                    f"property {node.name} declared {node.ty} but initialized with {ity}",
                    node.loc,
                )
            return Property(node.name, node.ty, init)
        if isinstance(node, sp.SSpike):
            return Spike(node.name)
        if isinstance(node, sp.SAssignment):
            target = self.resolve_path(node.target, node.loc)
            tty = self.prop_types.get(target)
            if tty is None:
                raise ElabError(f"assignment target {target} is not a property", node.loc)
            expr, ety = self.resolve_expr(node.expr, node.loc, allow_last=True)
            if ety is not tty:
                raise ElabError(
                    f"assignment to {target} ({tty}) from a {ety} expression", node.loc
                )
            return Assignment(node.name, expr, target)
        if isinstance(node, sp.SBinding):
            assert node.name is not None
            lhs = self._classify_lhs(node.lhs)
            rhs = self._classify_rhs(node.rhs)
            return Binding(node.name, lhs, node.ia, rhs)
        raise ElabError(f"unsupported surface node {node!r}")

    def _classify_lhs(self, lhs: object) -> Lhs:
        if isinstance(lhs, sp.SCondLhs):
            expr, ty = self.resolve_expr(lhs.expr, lhs.loc, allow_last=False)
            if ty is not Ty.BOOL:
                raise ElabError(f"binding condition must be Bool, got {ty}", lhs.loc)
            return Cond(expr)
        assert isinstance(lhs, sp.SPathLhs)
        target = self.resolve_path(lhs.path, lhs.loc)
        kind = self.kind_of(target)
        if lhs.deact:
            if kind is not Kind.PERMANENT:
                raise ElabError(f"'!->' needs a permanent process, {target} is {kind.value}", lhs.loc)
            return DeactivateOf(target)
        if kind is Kind.TRANSIENT:
            return TriggerOf(target)
        if kind is Kind.PROPERTY:
            return ChangeOf(target)
        return ActivateOf(target)

    def _classify_rhs(self, rhs: sp.SRhs) -> Rhs:
        target = self.resolve_path(rhs.path, rhs.loc)
        kind = self.kind_of(target)
        if rhs.deact:
            if kind is not Kind.PERMANENT:
                raise ElabError(f"'->!' needs a permanent process, {target} is {kind.value}", rhs.loc)
            return DoDeactivate(target)
        if kind is Kind.TRANSIENT:
            return DoTrigger(target)
        if kind is Kind.PERMANENT:
            return DoActivate(target)
        raise ElabError(f"'-> {target}' targets a property; properties cannot be triggered", rhs.loc)

    def _check_initializer_order(self, root: Component) -> None:
        """A property initializer may read only properties declared earlier."""
        from .core import free_vars, iter_processes

        for path, node in iter_processes(root):
            if not isinstance(node, Property):
                continue
            here = self.prop_order[path]
            for ref in free_vars(node.init):
                if self.prop_order[ref] >= here:
                    raise ElabError(
                        f"initializer of {path} reads {ref}, which is not declared earlier"
                    )


def resolve_and_classify(tree: sp.SComponent) -> Component:
    """Resolve relative paths, type-check, and classify binding sides."""
    return _Resolver(tree).resolve()


def elaborate(source: str) -> Component:
    """Full pipeline from surface text to a checked core AST."""
    surface = sp.parse(source)
    surface = elaborate_names(surface)
    surface = expand_graphical(surface)
    return resolve_and_classify(surface)
