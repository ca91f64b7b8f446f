"""C99 text backend for the IR.

Emits one self-contained translation unit: a struct holding fields and
activation flags, a reset function, one reaction function per external
event, and a trace-driven main that reads the shared event-trace format and
prints state dumps in the shared dump format.
"""

from __future__ import annotations

from typing import Optional

from .core import (
    Binary,
    Const,
    Expr,
    Last,
    Path,
    Ty,
    Unary,
    Var,
)
from .compiler import (
    EdgeTest,
    EmitTrigger,
    ExprTest,
    FlagTest,
    GuardedInstr,
    IrMethod,
    IrObject,
    SetField,
    SetFlag,
)

_C_TYPES = {
    Ty.INT: "int64_t",
    Ty.DOUBLE: "double",
    Ty.BOOL: "bool",
    Ty.STR: "const char *",
}

_PRELUDE = r"""#include <inttypes.h>
#include <math.h>
#include <setjmp.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static jmp_buf rt_jmp;
static const char *rt_kind;

static void rt_fail(const char *kind) {
    rt_kind = kind;
    longjmp(rt_jmp, 1);
}

static int64_t rt_addi(int64_t a, int64_t b) {
    if ((b > 0 && a > INT64_MAX - b) || (b < 0 && a < INT64_MIN - b))
        rt_fail("unsafe");
    return a + b;
}

static int64_t rt_subi(int64_t a, int64_t b) {
    if ((b < 0 && a > INT64_MAX + b) || (b > 0 && a < INT64_MIN + b))
        rt_fail("unsafe");
    return a - b;
}

static int64_t rt_muli(int64_t a, int64_t b) {
    if (a != 0 && b != 0) {
        if (a == -1 && b == INT64_MIN) rt_fail("unsafe");
        if (b == -1 && a == INT64_MIN) rt_fail("unsafe");
        int64_t r = (int64_t)((uint64_t)a * (uint64_t)b);
        if (r / a != b) rt_fail("unsafe");
        return r;
    }
    return 0;
}

static int64_t rt_divi(int64_t a, int64_t b) {
    if (b == 0 || (a == INT64_MIN && b == -1)) rt_fail("unsafe");
    return a / b;
}

static int64_t rt_modi(int64_t a, int64_t b) {
    if (b == 0 || (a == INT64_MIN && b == -1)) rt_fail("unsafe");
    return a % b;
}

static int64_t rt_negi(int64_t a) {
    if (a == INT64_MIN) rt_fail("unsafe");
    return -a;
}

static const char *rt_concat(const char *a, const char *b) {
    size_t la = strlen(a), lb = strlen(b);
    char *r = malloc(la + lb + 1);
    if (!r) { fprintf(stderr, "oom\n"); exit(70); }
    memcpy(r, a, la);
    memcpy(r + la, b, lb + 1);
    return r;
}

static const char *rt_str_of_int(int64_t v) {
    char *r = malloc(24);
    if (!r) { fprintf(stderr, "oom\n"); exit(70); }
    snprintf(r, 24, "%" PRId64, v);
    return r;
}

static void rt_format_double(char *buf, size_t n, double v) {
    if (isnan(v)) { snprintf(buf, n, "nan"); return; }
    if (isinf(v)) { snprintf(buf, n, v > 0 ? "inf" : "-inf"); return; }
    /* shortest representation that round-trips, like the reference dumps */
    for (int prec = 1; prec <= 17; prec++) {
        snprintf(buf, n, "%.*g", prec, v);
        if (strtod(buf, NULL) == v) break;
    }
    if (!strpbrk(buf, ".eE")) {
        size_t l = strlen(buf);
        snprintf(buf + l, n - l, ".0");
    }
}

static const char *rt_str_of_double(double v) {
    char *r = malloc(40);
    if (!r) { fprintf(stderr, "oom\n"); exit(70); }
    rt_format_double(r, 40, v);
    return r;
}

static const char *rt_str_of_bool(bool v) { return v ? "true" : "false"; }

static void rt_print_str(const char *s) {
    putchar('"');
    for (; *s; s++) {
        unsigned char c = (unsigned char)*s;
        if (c == '"') fputs("\\\"", stdout);
        else if (c == '\\') fputs("\\\\", stdout);
        else if (c == '\n') fputs("\\n", stdout);
        else if (c == '\t') fputs("\\t", stdout);
        else if (c < 0x20) printf("\\x%02x", c);
        else putchar(c);
    }
    putchar('"');
}

/* Keeps unused helpers from tripping -Wunused-function on small programs. */
static void rt_use_helpers_(void) {
    (void)rt_addi; (void)rt_subi; (void)rt_muli; (void)rt_divi; (void)rt_modi;
    (void)rt_negi; (void)rt_concat; (void)rt_str_of_int; (void)rt_str_of_double;
    (void)rt_str_of_bool; (void)rt_print_str; (void)rt_use_helpers_;
}
"""


def _c_escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20 or ord(ch) > 0x7E:
            out.append(f"\\x{ord(ch):02x}" if ord(ch) < 0x100 else "?")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


class _Emitter:
    def __init__(self, ir: IrObject):
        self.ir = ir
        self.field_ty: dict[Path, Ty] = {p: ty for p, ty, _ in ir.fields}
        self.names: dict[tuple[str, Path], str] = {}
        taken: set[str] = set()
        for kind, paths in (
            ("f", [p for p, _, _ in ir.fields]),
            ("a", [p for p, _ in ir.flags]),
        ):
            for p in paths:
                base = kind + "_" + "_".join(p.segments)
                name = base
                n = 2
                while name in taken:
                    name = f"{base}_{n}"
                    n += 1
                taken.add(name)
                self.names[(kind, p)] = name
        self.spike_list = sorted(ir.spikes, key=str)
        self.spike_index = {p: i for i, p in enumerate(self.spike_list)}
        mnames: set[str] = set()
        self.method_names: dict[tuple[str, Path], str] = {}
        for key in sorted(ir.methods, key=lambda k: (k[0], str(k[1]))):
            base = f"react_{key[0]}_" + "_".join(key[1].segments)
            name = base
            n = 2
            while name in mnames:
                name = f"{base}_{n}"
                n += 1
            mnames.add(name)
            self.method_names[key] = name

    # -- expression typing (elaboration guarantees consistency) -------------

    def ty_of(self, e: Expr) -> Ty:
        if isinstance(e, Const):
            return e.value.ty
        if isinstance(e, (Var, Last)):
            return self.field_ty[e.path]
        if isinstance(e, Unary):
            if e.op == "-":
                return self.ty_of(e.operand)
            if e.op == "!":
                return Ty.BOOL
            return Ty.STR
        assert isinstance(e, Binary)
        if e.op in ("+", "-", "*", "/", "%"):
            return self.ty_of(e.left)
        return Ty.BOOL

    # -- expression lowering -------------------------------------------------

    def expr(self, e: Expr, last: set[Path]) -> str:
        if isinstance(e, Const):
            v = e.value
            if v.ty is Ty.INT:
                return f"INT64_C({v.raw})"
            if v.ty is Ty.DOUBLE:
                if v.raw != v.raw:
                    return "(0.0/0.0)"
                if v.raw in (float("inf"), float("-inf")):
                    return "(1.0/0.0)" if v.raw > 0 else "(-1.0/0.0)"
                return repr(v.raw)
            if v.ty is Ty.BOOL:
                return "true" if v.raw else "false"
            return _c_escape(v.raw)
        if isinstance(e, Var):
            return "s->" + self.names[("f", e.path)]
        if isinstance(e, Last):
            return "last_" + self.names[("f", e.path)]
        if isinstance(e, Unary):
            arg = self.expr(e.operand, last)
            ty = self.ty_of(e.operand)
            if e.op == "-":
                return f"rt_negi({arg})" if ty is Ty.INT else f"(-({arg}))"
            if e.op == "!":
                return f"(!({arg}))"
            return {
                Ty.INT: f"rt_str_of_int({arg})",
                Ty.DOUBLE: f"rt_str_of_double({arg})",
                Ty.BOOL: f"rt_str_of_bool({arg})",
                Ty.STR: f"({arg})",
            }[ty]
        assert isinstance(e, Binary)
        a = self.expr(e.left, last)
        b = self.expr(e.right, last)
        ty = self.ty_of(e.left)
        if e.op in ("+", "-", "*", "/", "%"):
            if ty is Ty.INT:
                fn = {"+": "rt_addi", "-": "rt_subi", "*": "rt_muli",
                      "/": "rt_divi", "%": "rt_modi"}[e.op]
                return f"{fn}({a}, {b})"
            if ty is Ty.STR:
                return f"rt_concat({a}, {b})"
            if e.op == "%":
                return f"fmod({a}, {b})"
            return f"(({a}) {e.op} ({b}))"
        if e.op in ("==", "!=") and ty is Ty.STR:
            rel = "==" if e.op == "==" else "!="
            return f"(strcmp({a}, {b}) {rel} 0)"
        return f"(({a}) {e.op} ({b}))"

    # -- value comparison for conflict detection ----------------------------

    def values_equal(self, ty: Ty, a: str, b: str) -> str:
        if ty is Ty.STR:
            return f"strcmp({a}, {b}) == 0"
        return f"{a} == {b}"

    # -- program parts -------------------------------------------------------

    def struct(self) -> list[str]:
        lines = ["typedef struct {"]
        for p, ty, _ in self.ir.fields:
            lines.append(f"    {_C_TYPES[ty]}{'' if ty is Ty.STR else ' '}{self.names[('f', p)]};")
        for p, _ in self.ir.flags:
            lines.append(f"    bool {self.names[('a', p)]};")
        lines.append("} State;")
        return lines

    def reset(self) -> list[str]:
        lines = ["static void reset(State *s) {"]
        for p, _ty, init in self.ir.fields:
            lines.append(f"    s->{self.names[('f', p)]} = {self.expr(init, set())};")
        for p, active in self.ir.flags:
            lines.append(
                f"    s->{self.names[('a', p)]} = {'true' if active else 'false'};"
            )
        lines.append("}")
        return lines

    def method(self, key: tuple[str, Path], m: IrMethod) -> list[str]:
        name = self.method_names[key]
        param = ""
        if m.param_ty is not None:
            cty = _C_TYPES[m.param_ty]
            param = f", {cty}{'' if m.param_ty is Ty.STR else ' '}param"
        lines = [f"static void {name}(State *s, bool *emitted{param}) {{"]
        lines.append("    (void)s; (void)emitted;")
        # Entry snapshots: every flag (for edge tests), last-read fields.
        flags_snapshotted = sorted(
            {t.path for gi in m.instrs for t in gi.guard if isinstance(t, EdgeTest)},
            key=str,
        )
        for p in flags_snapshotted:
            fl = self.names[("a", p)]
            lines.append(f"    const bool was_{fl} = s->{fl};")
        for p in sorted(m.last_fields, key=str):
            f = self.names[("f", p)]
            ty = self.field_ty[p]
            lines.append(f"    const {_C_TYPES[ty]}{'' if ty is Ty.STR else ' '}last_{f} = s->{f};")
        # Conflict-detection locals for multiply-written targets.
        field_targets: dict[Path, int] = {}
        flag_targets: dict[Path, int] = {}
        for gi in m.instrs:
            if isinstance(gi.instr, SetField):
                field_targets[gi.instr.path] = field_targets.get(gi.instr.path, 0) + 1
            elif isinstance(gi.instr, SetFlag):
                flag_targets[gi.instr.path] = flag_targets.get(gi.instr.path, 0) + 1
        for p, n in sorted(field_targets.items(), key=lambda kv: str(kv[0])):
            if n > 1:
                f = self.names[("f", p)]
                lines.append(f"    bool wrote_{f} = false;")
        for p, n in sorted(flag_targets.items(), key=lambda kv: str(kv[0])):
            if n > 1:
                fl = self.names[("a", p)]
                lines.append(f"    bool wrote_{fl} = false;")
                lines.append(f"    bool dir_{fl} = false;")
        for gi in m.instrs:
            lines.extend(self.guarded_instr(gi, field_targets, flag_targets))
        lines.append("}")
        return lines

    def guard_expr(self, gi: GuardedInstr) -> str:
        parts = []
        for t in gi.guard:
            if isinstance(t, FlagTest):
                parts.append(f"s->{self.names[('a', t.path)]}")
            elif isinstance(t, EdgeTest):
                fl = self.names[("a", t.path)]
                parts.append(f"was_{fl}" if t.was_active else f"!was_{fl}")
            else:
                parts.append(f"({self.expr(t.expr, set())})")
        return " && ".join(parts) if parts else "true"

    def guarded_instr(
        self,
        gi: GuardedInstr,
        field_targets: dict[Path, int],
        flag_targets: dict[Path, int],
    ) -> list[str]:
        lines = [f"    if ({self.guard_expr(gi)}) {{"]
        instr = gi.instr
        if isinstance(instr, SetField):
            f = self.names[("f", instr.path)]
            ty = self.field_ty[instr.path]
            value = "param" if instr.expr is None else self.expr(instr.expr, set())
            lines.append(
                f"        {_C_TYPES[ty]}{'' if ty is Ty.STR else ' '}v = {value};"
            )
            if field_targets.get(instr.path, 0) > 1:
                eq = self.values_equal(ty, f"s->{f}", "v")
                lines.append(
                    f"        if (wrote_{f} && !({eq})) rt_fail(\"conflicting-assign\");"
                )
                lines.append(f"        wrote_{f} = true;")
            lines.append(f"        s->{f} = v;")
        elif isinstance(instr, SetFlag):
            fl = self.names[("a", instr.path)]
            val = "true" if instr.value else "false"
            if flag_targets.get(instr.path, 0) > 1:
                lines.append(
                    f"        if (wrote_{fl} && dir_{fl} != {val})"
                    f" rt_fail(\"conflicting-activation\");"
                )
                lines.append(f"        wrote_{fl} = true;")
                lines.append(f"        dir_{fl} = {val};")
            lines.append(f"        s->{fl} = {val};")
        else:
            assert isinstance(instr, EmitTrigger)
            lines.append(f"        emitted[{self.spike_index[instr.path]}] = true;")
        lines.append("    }")
        return lines

    def dump_fn(self) -> list[str]:
        lines = ["static void dump_state(const State *s, const bool *emitted) {"]
        for p, ty, _ in sorted(self.ir.fields, key=lambda t: str(t[0])):
            f = self.names[("f", p)]
            if ty is Ty.INT:
                lines.append(f'    printf("env {p} = %" PRId64 "\\n", s->{f});')
            elif ty is Ty.DOUBLE:
                lines.append("    {")
                lines.append("        char buf[40];")
                lines.append(f"        rt_format_double(buf, sizeof buf, s->{f});")
                lines.append(f'        printf("env {p} = %s\\n", buf);')
                lines.append("    }")
            elif ty is Ty.BOOL:
                lines.append(
                    f'    printf("env {p} = %s\\n", s->{f} ? "true" : "false");'
                )
            else:
                lines.append(f'    printf("env {p} = ");')
                lines.append(f"    rt_print_str(s->{f});")
                lines.append('    printf("\\n");')
        for p, _ in sorted(self.ir.flags, key=lambda t: str(t[0])):
            fl = self.names[("a", p)]
            lines.append(f'    if (s->{fl}) printf("active {p}\\n");')
        lines.append("    if (emitted) {")
        for i, p in enumerate(self.spike_list):
            lines.append(f'        if (emitted[{i}]) printf("emit trigger {p}\\n");')
        lines.append("    }")
        lines.append("}")
        return lines

    def main_fn(self) -> list[str]:
        n_spikes = max(1, len(self.spike_list))
        lines = []
        lines.append(
            r"""
static char *read_token(char **cur) {
    char *p = *cur;
    while (*p == ' ' || *p == '\t') p++;
    if (!*p) { *cur = p; return NULL; }
    char *start = p;
    while (*p && *p != ' ' && *p != '\t') p++;
    if (*p) { *p = '\0'; p++; }
    *cur = p;
    return start;
}

static const char *parse_string(char *tok, char **rest) {
    /* tok points at the opening quote inside the original line */
    char *out = tok + 1;
    char *w = out;
    char *r = tok + 1;
    while (*r && *r != '"') {
        if (*r == '\\') {
            r++;
            switch (*r) {
                case 'n': *w++ = '\n'; break;
                case 't': *w++ = '\t'; break;
                case '"': *w++ = '"'; break;
                case '\\': *w++ = '\\'; break;
                case 'x': {
                    char h[3] = {r[1], r[2], 0};
                    *w++ = (char)strtol(h, NULL, 16);
                    r += 2;
                    break;
                }
                default: *w++ = *r; break;
            }
            r++;
        } else {
            *w++ = *r++;
        }
    }
    *w = '\0';
    *rest = (*r == '"') ? r + 1 : r;
    return out;
}
"""
        )
        lines.append("int main(int argc, char **argv) {")
        lines.append("    (void)rt_use_helpers_;")
        lines.append("    FILE * volatile in = stdin;")
        lines.append("    if (argc > 1) {")
        lines.append('        in = fopen(argv[1], "r");')
        lines.append('        if (!in) { fprintf(stderr, "cannot open %s\\n", argv[1]); return 2; }')
        lines.append("    }")
        lines.append("    State st;")
        lines.append("    reset(&st);")
        lines.append(f"    bool emitted[{n_spikes}];")
        lines.append('    printf("== init\\n");')
        lines.append("    dump_state(&st, NULL);")
        lines.append("    char line[4096];")
        lines.append("    volatile int index = 0;")
        lines.append("    while (fgets(line, sizeof line, in)) {")
        lines.append("        char *nl = strchr(line, '\\n');")
        lines.append("        if (nl) *nl = '\\0';")
        lines.append("        char *cur = line;")
        lines.append("        while (*cur == ' ' || *cur == '\\t') cur++;")
        lines.append("        if (!*cur || *cur == '#') continue;")
        lines.append("        index++;")
        lines.append("        char header[8448];")
        lines.append("        memset(emitted, 0, sizeof emitted);")
        lines.append("        char *kind = read_token(&cur);")
        lines.append("        if (setjmp(rt_jmp)) {")
        lines.append('            printf("== error %d %s\\n", index, rt_kind);')
        lines.append("            return 0;")
        lines.append("        }")
        lines.append('        if (strcmp(kind, "trigger") == 0) {')
        lines.append("            char *path = read_token(&cur);")
        lines.append('            snprintf(header, sizeof header, "== reaction %d trigger %s", index, path);')
        trigger_dispatch: list[str] = []
        for key, name in self.method_names.items():
            if key[0] != "trigger":
                continue
            trigger_dispatch.append(
                f'            if (strcmp(path, "{key[1]}") == 0) {{ {name}(&st, emitted); puts(header); dump_state(&st, emitted); continue; }}'
            )
        lines.extend(sorted(trigger_dispatch))
        lines.append('            printf("== error %d inadmissible\\n", index);')
        lines.append("            return 0;")
        lines.append('        } else if (strcmp(kind, "assign") == 0) {')
        lines.append("            while (*cur == ' ' || *cur == '\\t') cur++;")
        lines.append("            char littext[4096];")
        lines.append("            const char *strv = NULL;")
        lines.append("            int64_t intv = 0; double dblv = 0.0; bool boolv = false;")
        lines.append("            (void)intv; (void)dblv; (void)boolv;")
        lines.append("            int litkind; /* 0 int, 1 double, 2 bool, 3 str */")
        lines.append("            if (*cur == '\"') {")
        lines.append("                char *rest;")
        lines.append("                strv = parse_string(cur, &rest);")
        lines.append("                cur = rest;")
        lines.append("                litkind = 3;")
        lines.append('                snprintf(littext, sizeof littext, "%s", strv);')
        lines.append("            } else {")
        lines.append("                char *tok = read_token(&cur);")
        lines.append('                snprintf(littext, sizeof littext, "%s", tok);')
        lines.append('                if (strcmp(tok, "true") == 0 || strcmp(tok, "false") == 0) {')
        lines.append('                    litkind = 2; boolv = strcmp(tok, "true") == 0;')
        lines.append("                } else if (strpbrk(tok, \".eE\") || strstr(tok, \"inf\") || strstr(tok, \"nan\")) {")
        lines.append("                    litkind = 1; dblv = strtod(tok, NULL);")
        lines.append("                } else {")
        lines.append("                    litkind = 0; intv = strtoll(tok, NULL, 10);")
        lines.append("                }")
        lines.append("            }")
        lines.append("            char *path = read_token(&cur);")
        lines.append("            char littxt2[4200];")
        lines.append("            if (litkind == 3) {")
        # reconstruct escaped literal text for the header
        lines.append('                snprintf(littxt2, sizeof littxt2, "\\"%s\\"", littext);')
        lines.append("            } else if (litkind == 1) {")
        lines.append("                rt_format_double(littxt2, sizeof littxt2, dblv);")
        lines.append("            } else {")
        lines.append('                snprintf(littxt2, sizeof littxt2, "%s", littext);')
        lines.append("            }")
        lines.append('            snprintf(header, sizeof header, "== reaction %d assign %s %s", index, littxt2, path);')
        assign_dispatch: list[str] = []
        for key, name in self.method_names.items():
            if key[0] != "assign":
                continue
            m = self.ir.methods[key]
            p = key[1]
            parent = p.parent
            cond_active = (
                "true"
                if parent.is_root
                else f"st.{self.names[('a', parent)]}"
            )
            kind_code = {Ty.INT: 0, Ty.DOUBLE: 1, Ty.BOOL: 2, Ty.STR: 3}[m.param_ty]
            arg = {0: "intv", 1: "dblv", 2: "boolv", 3: "strv"}[kind_code]
            assign_dispatch.append(
                f'            if (strcmp(path, "{p}") == 0) {{'
                f" if (litkind != {kind_code} || !({cond_active}))"
                f' {{ printf("== error %d inadmissible\\n", index); return 0; }}'
                f" {name}(&st, emitted, {arg}); puts(header); dump_state(&st, emitted); continue; }}"
            )
        lines.extend(sorted(assign_dispatch))
        lines.append('            printf("== error %d inadmissible\\n", index);')
        lines.append("            return 0;")
        lines.append("        } else {")
        lines.append('            fprintf(stderr, "bad trace line %d\\n", index);')
        lines.append("            return 2;")
        lines.append("        }")
        lines.append("    }")
        lines.append("    return 0;")
        lines.append("}")
        return lines

    def emit(self) -> str:
        parts = [_PRELUDE]
        parts.append("\n".join(self.struct()))
        parts.append("\n".join(self.reset()))
        for key in sorted(self.ir.methods, key=lambda k: (k[0], str(k[1]))):
            parts.append("\n".join(self.method(key, self.ir.methods[key])))
        parts.append("\n".join(self.dump_fn()))
        parts.append("\n".join(self.main_fn()))
        return "\n\n".join(parts) + "\n"


def emit_c(ir: IrObject) -> str:
    return _Emitter(ir).emit()
