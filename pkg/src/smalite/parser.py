"""Tokenizer and parsers for the Smala-like surface syntax and the core dump.

`parse` builds a surface tree with line/column positions; names may still be
anonymous (`_`), paths relative, and graphical components unexpanded.
`parse_core` reads the canonical core dump produced by core.dump_core.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import (
    Binary,
    Component,
    Cond,
    Const,
    Expr,
    InitActivation,
    Last,
    Lhs,
    Path,
    Process,
    Rhs,
    SmaliteError,
    Ty,
    Unary,
    Var,
    ActivateOf,
    Assignment,
    Binding,
    ChangeOf,
    DeactivateOf,
    DoActivate,
    DoDeactivate,
    DoTrigger,
    Property,
    Spike,
    TriggerOf,
    bool_value,
    double_value,
    int_value,
    str_value,
)

GRAPHICAL_KINDS = ("Frame", "Rectangle", "FillColor", "Text", "Font", "Exit")
TYPE_KEYWORDS = {"Int": Ty.INT, "Double": Ty.DOUBLE, "Bool": Ty.BOOL, "Str": Ty.STR}
RESERVED = {"last", "str", "true", "false"}


class ParseError(SmaliteError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Tokens
# ---------------------------------------------------------------------------

_PUNCT = [
    "->",
    "=:",
    "==",
    "!=",
    "<=",
    ">=",
    "&&",
    "||",
    "{",
    "}",
    "(",
    ")",
    ",",
    ";",
    ":",
    "<",
    ">",
    "!",
    "+",
    "-",
    "*",
    "/",
    "%",
    ".",
    "?",
]


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'int' | 'float' | 'string' | 'punct' | 'eof'
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def error(msg: str) -> ParseError:
        return ParseError(msg, line, col)

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token("ident", source[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            tokens.append(
                Token("float" if is_float else "int", source[i:j], start_line, start_col)
            )
            col += j - i
            i = j
            continue
        if ch == '"':
            j = i + 1
            out: list[str] = []
            while True:
                if j >= n or source[j] == "\n":
                    raise error("unterminated string literal")
                c = source[j]
                if c == '"':
                    j += 1
                    break
                if c == "\\":
                    if j + 1 >= n:
                        raise error("unterminated escape")
                    esc = source[j + 1]
                    if esc == "n":
                        out.append("\n")
                    elif esc == "t":
                        out.append("\t")
                    elif esc == '"':
                        out.append('"')
                    elif esc == "\\":
                        out.append("\\")
                    elif esc == "x":
                        if j + 3 >= n:
                            raise error("truncated \\x escape")
                        out.append(chr(int(source[j + 2 : j + 4], 16)))
                        j += 2
                    else:
                        raise error(f"unknown escape: \\{esc}")
                    j += 2
                else:
                    out.append(c)
                    j += 1
            tokens.append(Token("string", "".join(out), start_line, start_col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if source.startswith(p, i):
                tokens.append(Token("punct", p, start_line, start_col))
                i += len(p)
                col += len(p)
                break
        else:
            raise error(f"unexpected character {ch!r}")
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Surface AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Loc:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class SurfaceProcess:
    __slots__ = ()


@dataclass(frozen=True)
class SProperty(SurfaceProcess):
    name: str
    ty: Ty
    init: Expr
    loc: Loc


@dataclass(frozen=True)
class SSpike(SurfaceProcess):
    name: str
    loc: Loc


@dataclass(frozen=True)
class SAssignment(SurfaceProcess):
    name: str
    expr: Expr
    target: Path  # relative until resolution
    loc: Loc


@dataclass(frozen=True)
class SPathLhs:
    """`path ->` or `path !->`; the abstract kind is fixed by the target."""

    path: Path
    deact: bool
    loc: Loc


@dataclass(frozen=True)
class SCondLhs:
    expr: Expr
    loc: Loc


@dataclass(frozen=True)
class SRhs:
    """`-> path` or `->! path`."""

    path: Path
    deact: bool
    loc: Loc


@dataclass(frozen=True)
class SBinding(SurfaceProcess):
    name: Optional[str]
    lhs: object  # SPathLhs | SCondLhs
    ia: InitActivation
    rhs: SRhs
    loc: Loc


@dataclass(frozen=True)
class SComponent(SurfaceProcess):
    kind: str  # 'Component' or a graphical kind
    ia: InitActivation
    name: Optional[str]  # None for `_`
    args: tuple[Expr, ...]
    children: tuple[SurfaceProcess, ...]
    loc: Loc


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def error(self, message: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col)

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def at_punct(self, text: str) -> bool:
        return self.tok.kind == "punct" and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at_punct(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at_punct(text):
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'}")
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}, found {self.tok.text or 'end of input'}")
        if self.tok.text in RESERVED:
            raise self.error(f"reserved word {self.tok.text!r} cannot be used as {what}")
        return self.advance()

    def loc(self) -> Loc:
        return Loc(self.tok.line, self.tok.col)

    # -- shared pieces ----------------------------------------------------

    def parse_ia(self) -> InitActivation:
        """Optional `<a>` / `<d>` marker; defaults to active."""
        if (
            self.at_punct("<")
            and self.peek(1).kind == "ident"
            and self.peek(1).text in ("a", "d")
            and self.peek(2).kind == "punct"
            and self.peek(2).text == ">"
        ):
            self.advance()
            flag = self.advance().text
            self.advance()
            return InitActivation.ACTIVE if flag == "a" else InitActivation.INACTIVE
        return InitActivation.ACTIVE

    def parse_path(self) -> Path:
        segs = [self.expect_ident("path segment").text]
        while self.at_punct("."):
            self.advance()
            segs.append(self.expect_ident("path segment").text)
        return Path(tuple(segs))

    # -- expressions -------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        e = self.parse_and()
        while self.at_punct("||"):
            self.advance()
            e = Binary("||", e, self.parse_and())
        return e

    def parse_and(self) -> Expr:
        e = self.parse_equality()
        while self.at_punct("&&"):
            self.advance()
            e = Binary("&&", e, self.parse_equality())
        return e

    def parse_equality(self) -> Expr:
        e = self.parse_relational()
        while self.tok.kind == "punct" and self.tok.text in ("==", "!="):
            op = self.advance().text
            e = Binary(op, e, self.parse_relational())
        return e

    def parse_relational(self) -> Expr:
        e = self.parse_additive()
        while self.tok.kind == "punct" and self.tok.text in ("<", "<=", ">", ">="):
            op = self.advance().text
            e = Binary(op, e, self.parse_additive())
        return e

    def parse_additive(self) -> Expr:
        e = self.parse_multiplicative()
        while self.tok.kind == "punct" and self.tok.text in ("+", "-"):
            op = self.advance().text
            e = Binary(op, e, self.parse_multiplicative())
        return e

    def parse_multiplicative(self) -> Expr:
        e = self.parse_unary()
        while self.tok.kind == "punct" and self.tok.text in ("*", "/", "%"):
            op = self.advance().text
            e = Binary(op, e, self.parse_unary())
        return e

    def parse_unary(self) -> Expr:
        if self.at_punct("-"):
            self.advance()
            inner = self.parse_unary()
            # Fold negated numeric literals so `-1` is a literal constant.
            if isinstance(inner, Const) and inner.value.ty is Ty.INT:
                return Const(int_value(-inner.value.raw))
            if isinstance(inner, Const) and inner.value.ty is Ty.DOUBLE:
                return Const(double_value(-inner.value.raw))
            return Unary("-", inner)
        if self.at_punct("!"):
            self.advance()
            return Unary("!", self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return Const(int_value(int(t.text)))
        if t.kind == "float":
            self.advance()
            return Const(double_value(float(t.text)))
        if t.kind == "string":
            self.advance()
            return Const(str_value(t.text))
        if t.kind == "ident":
            if t.text == "true":
                self.advance()
                return Const(bool_value(True))
            if t.text == "false":
                self.advance()
                return Const(bool_value(False))
            if t.text == "last":
                self.advance()
                return Last(self.parse_path())
            if t.text == "str":
                self.advance()
                self.expect("(")
                e = self.parse_expr()
                self.expect(")")
                return Unary("str", e)
            return Var(self.parse_path())
        if self.at_punct("("):
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        raise self.error(f"expected expression, found {t.text or 'end of input'}")

    # -- surface items ------------------------------------------------------

    def parse_program(self) -> SComponent:
        item = self.parse_item()
        if not isinstance(item, SComponent):
            raise self.error("a program must start with a component")
        if self.tok.kind != "eof":
            raise self.error("trailing input after the root component")
        return item

    def parse_component_body(self) -> tuple[SurfaceProcess, ...]:
        self.expect("{")
        items: list[SurfaceProcess] = []
        while not self.at_punct("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated component body, expected '}'")
            items.append(self.parse_item())
        self.expect("}")
        return tuple(items)

    def end_item(self) -> None:
        """Simple items end with ';'; it may be omitted right before '}'."""
        if self.accept(";"):
            return
        if self.at_punct("}") or self.tok.kind == "eof":
            return
        raise self.error(f"expected ';', found {self.tok.text or 'end of input'}")

    def parse_item(self) -> SurfaceProcess:
        loc = self.loc()
        t = self.tok
        if t.kind == "ident" and t.text == "Component":
            self.advance()
            ia = self.parse_ia()
            name = self.parse_decl_name()
            children = self.parse_component_body()
            self.accept(";")
            return SComponent("Component", ia, name, (), children, loc)
        if t.kind == "ident" and t.text in GRAPHICAL_KINDS:
            kind = self.advance().text
            ia = self.parse_ia()
            name = self.parse_decl_name()
            self.expect("(")
            args: list[Expr] = []
            if not self.at_punct(")"):
                args.append(self.parse_expr())
                while self.accept(","):
                    args.append(self.parse_expr())
            self.expect(")")
            children: tuple[SurfaceProcess, ...] = ()
            if self.at_punct("{"):
                children = self.parse_component_body()
                self.accept(";")
            else:
                self.end_item()
            return SComponent(kind, ia, name, tuple(args), children, loc)
        if t.kind == "ident" and t.text in TYPE_KEYWORDS:
            self.advance()
            name = self.expect_ident("property name").text
            init = self.parse_expr()
            self.end_item()
            return SProperty(name, TYPE_KEYWORDS[t.text], init, loc)
        if t.kind == "ident" and t.text == "Spike":
            self.advance()
            name = self.expect_ident("spike name").text
            self.end_item()
            return SSpike(name, loc)
        if t.kind == "ident" and self.peek(1).kind == "punct" and self.peek(1).text == ":":
            name = self.advance().text
            self.advance()  # ':'
            return self.parse_named_tail(name, loc)
        # Unnamed binding: `path ->`, `path !->`, or `(e) ->`.
        return self.parse_binding(None, loc)

    def parse_decl_name(self) -> Optional[str]:
        tok = self.expect_ident("component name")
        return None if tok.text == "_" else tok.text

    def parse_named_tail(self, name: str, loc: Loc) -> SurfaceProcess:
        """After `name :` — an assignment (`e =: path`) or a binding."""
        if self.at_punct("("):
            save = self.pos
            self.advance()
            expr = self.parse_expr()
            self.expect(")")
            if self.at_punct("->"):
                cond = SCondLhs(expr, loc)
                ia, rhs = self.parse_arrow_rhs()
                self.end_item()
                return SBinding(name, cond, ia, rhs, loc)
            self.pos = save
        expr = self.parse_expr()
        if self.at_punct("=:"):
            self.advance()
            target = self.parse_path()
            self.end_item()
            return SAssignment(name, expr, target, loc)
        if isinstance(expr, Var) and (self.at_punct("->") or self.at_punct("!")):
            return self.parse_binding_after_path(name, expr.path, loc)
        raise self.error("expected '=:' (assignment) or '->' (binding)")

    def parse_binding(self, name: Optional[str], loc: Loc) -> SBinding:
        if self.at_punct("("):
            self.advance()
            expr = self.parse_expr()
            self.expect(")")
            if not self.at_punct("->"):
                raise self.error("expected '->' after binding condition")
            ia, rhs = self.parse_arrow_rhs()
            self.end_item()
            return SBinding(name, SCondLhs(expr, loc), ia, rhs, loc)
        path = self.parse_path()
        return self.parse_binding_after_path(name, path, loc)

    def parse_binding_after_path(self, name: Optional[str], path: Path, loc: Loc) -> SBinding:
        deact = False
        if self.at_punct("!"):
            self.advance()
            deact = True
        if not self.at_punct("->"):
            raise self.error("expected '->' in binding")
        ia, rhs = self.parse_arrow_rhs()
        self.end_item()
        return SBinding(name, SPathLhs(path, deact, loc), ia, rhs, loc)

    def parse_arrow_rhs(self) -> tuple[InitActivation, SRhs]:
        self.expect("->")
        ia = self.parse_ia()
        rloc = self.loc()
        deact = False
        if self.at_punct("!"):
            self.advance()
            deact = True
        path = self.parse_path()
        return ia, SRhs(path, deact, rloc)


def parse(source: str) -> SComponent:
    """Parse surface source text into a surface tree."""
    return _Parser(tokenize(source)).parse_program()


# ---------------------------------------------------------------------------
# Core dump reader
# ---------------------------------------------------------------------------

_TY_BY_NAME = {t.value: t for t in Ty}


class _CoreParser(_Parser):
    def parse_core_program(self) -> Component:
        p = self.parse_core_process()
        if not isinstance(p, Component):
            raise self.error("a core program must be a component")
        if self.tok.kind != "eof":
            raise self.error("trailing input after the root component")
        return p

    def keyword(self) -> str:
        if self.tok.kind != "ident":
            raise self.error("expected a core process keyword")
        return self.tok.text

    def parse_core_ia(self) -> InitActivation:
        self.expect("<")
        flag = self.advance().text
        if flag not in ("a", "d"):
            raise self.error("expected activation flag 'a' or 'd'")
        self.expect(">")
        return InitActivation.ACTIVE if flag == "a" else InitActivation.INACTIVE

    def parse_core_process(self) -> Process:
        kw = self.keyword()
        if kw == "component":
            self.advance()
            ia = self.parse_core_ia()
            name = self.expect_ident("component name").text
            self.expect("{")
            children: list[Process] = []
            while not self.at_punct("}"):
                children.append(self.parse_core_process())
            self.expect("}")
            return Component(ia, name, tuple(children))
        if kw == "property":
            self.advance()
            self.expect("<")
            ty_tok = self.advance()
            if ty_tok.text not in _TY_BY_NAME:
                raise self.error(f"unknown type {ty_tok.text!r}", ty_tok)
            self.expect(">")
            name = self.expect_ident("property name").text
            self.expect(":")
            init = self.parse_expr()
            self.expect(";")
            return Property(name, _TY_BY_NAME[ty_tok.text], init)
        if kw == "spike":
            self.advance()
            name = self.expect_ident("spike name").text
            self.expect(";")
            return Spike(name)
        if kw == "assign":
            self.advance()
            name = self.expect_ident("assignment name").text
            self.expect(":")
            expr = self.parse_expr()
            self.expect("=:")
            target = self.parse_path()
            self.expect(";")
            return Assignment(name, expr, target)
        if kw == "binding":
            self.advance()
            ia = self.parse_core_ia()
            name = self.expect_ident("binding name").text
            self.expect(":")
            lhs = self.parse_core_lhs()
            self.expect("->")
            rhs = self.parse_core_rhs()
            self.expect(";")
            return Binding(name, lhs, ia, rhs)
        raise self.error(f"unknown core process keyword {kw!r}")

    def parse_core_lhs(self) -> Lhs:
        if self.tok.kind == "ident" and self.tok.text in ("T", "A", "D", "C"):
            kind = self.advance().text
            self.expect("?")
            self.expect("(")
            path = self.parse_path()
            self.expect(")")
            return {
                "T": TriggerOf,
                "A": ActivateOf,
                "D": DeactivateOf,
                "C": ChangeOf,
            }[kind](path)
        self.expect("(")
        expr = self.parse_expr()
        self.expect(")")
        self.expect("?")
        return Cond(expr)

    def parse_core_rhs(self) -> Rhs:
        if self.tok.kind != "ident" or self.tok.text not in ("T", "A", "D"):
            raise self.error("expected binding rhs T!/A!/D!")
        kind = self.advance().text
        self.expect("!")
        self.expect("(")
        path = self.parse_path()
        self.expect(")")
        return {"T": DoTrigger, "A": DoActivate, "D": DoDeactivate}[kind](path)


def parse_core(source: str) -> Component:
    """Parse a canonical core dump back into a core AST."""
    return _CoreParser(tokenize(source)).parse_core_program()
