"""Command-line entry points.

`smalite` drives the pipeline directly (check | interp | compile | run |
repl | graph); `smalite-difftest` runs the differential campaign. Exit codes:
0 success, 1 diagnostics/differences found, 2 usage or input error, 70
internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path as FsPath

from . import pipeline
from .analysis import has_errors
from .compiler import dump_ir
from .core import SmaliteError, dump_core
from .difftest import GenConfig, junit_xml, run_campaign
from .elaborate import ElabError
from .formats import TraceFormatError, parse_trace
from .parser import ParseError


def _read(path: str) -> str:
    try:
        return FsPath(path).read_text()
    except OSError as exc:
        print(f"smalite: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(2) from exc


def _load_program(path: str):
    try:
        return pipeline.load(_read(path))
    except (ParseError, ElabError) as exc:
        print(f"smalite: {path}: {exc}", file=sys.stderr)
        raise SystemExit(2) from exc


def _load_trace(path: str):
    try:
        return parse_trace(_read(path))
    except TraceFormatError as exc:
        print(f"smalite: {path}: {exc}", file=sys.stderr)
        raise SystemExit(2) from exc


def _cmd_check(args) -> int:
    p = _load_program(args.file)
    g, diags = pipeline.analyze(p, prune=not args.no_prune)
    if args.dump_graph:
        FsPath(args.dump_graph).write_text(g.to_dot())
    for line in pipeline.diagnostic_lines(diags):
        print(line)
    return 1 if has_errors(diags) else 0


def _cmd_graph(args) -> int:
    p = _load_program(args.file)
    dot = pipeline.graph_dot(p, prune=not args.no_prune)
    if args.output:
        FsPath(args.output).write_text(dot)
    else:
        print(dot, end="")
    return 0


def _cmd_interp(args) -> int:
    p = _load_program(args.file)
    events = _load_trace(args.trace)
    print(pipeline.interp_dumps(p, events), end="")
    return 0


def _cmd_compile(args) -> int:
    p = _load_program(args.file)
    try:
        ir = pipeline.compile_ir(p, prune=not args.no_prune, force=args.force)
    except pipeline.CheckFailure as exc:
        for line in pipeline.diagnostic_lines(exc.diags):
            print(line)
        return 1
    if args.emit_core:
        print(dump_core(p), end="")
    if args.emit_c:
        from .cgen import emit_c

        FsPath(args.emit_c).write_text(emit_c(ir))
    if args.emit_ir or not (args.emit_c or args.emit_core):
        print(dump_ir(ir), end="")
    return 0


def _cmd_run(args) -> int:
    p = _load_program(args.file)
    events = _load_trace(args.trace)
    try:
        ir = pipeline.compile_ir(p, force=args.force)
    except pipeline.CheckFailure as exc:
        for line in pipeline.diagnostic_lines(exc.diags):
            print(line)
        return 1
    print(pipeline.vm_dumps(ir, events), end="")
    return 0


def _cmd_repl(args) -> int:
    p = _load_program(args.file)
    session = pipeline.Session(p)
    print(session.initial_dump(), end="")
    for raw in sys.stdin:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in ("quit", "exit"):
            break
        try:
            events = parse_trace(line)
        except TraceFormatError as exc:
            print(f"error: {exc}", file=sys.stderr)
            continue
        for ev in events:
            print(session.step(ev), end="")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="smalite", description="reactive UI language toolchain"
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check", help="run the static well-formedness checks")
    c.add_argument("file")
    c.add_argument("--no-prune", action="store_true",
                   help="skip constant-condition pruning before cycle checking")
    c.add_argument("--dump-graph", metavar="FILE",
                   help="also write the propagation graph as DOT")
    c.set_defaults(fn=_cmd_check)

    g = sub.add_parser("graph", help="print the pruned propagation graph (DOT)")
    g.add_argument("file")
    g.add_argument("--no-prune", action="store_true")
    g.add_argument("-o", "--output")
    g.set_defaults(fn=_cmd_graph)

    i = sub.add_parser("interp", help="run the reference interpreter over a trace")
    i.add_argument("file")
    i.add_argument("--trace", required=True)
    i.set_defaults(fn=_cmd_interp)

    k = sub.add_parser("compile", help="compile and emit core/IR/C")
    k.add_argument("file")
    k.add_argument("--emit-core", action="store_true")
    k.add_argument("--emit-ir", action="store_true")
    k.add_argument("--emit-c", metavar="FILE")
    k.add_argument("--no-prune", action="store_true")
    k.add_argument("--force", action="store_true",
                   help="compile even when diagnostics are errors")
    k.set_defaults(fn=_cmd_compile)

    r = sub.add_parser("run", help="compile then execute a trace on the VM")
    r.add_argument("file")
    r.add_argument("--trace", required=True)
    r.add_argument("--force", action="store_true")
    r.set_defaults(fn=_cmd_run)

    rp = sub.add_parser("repl", help="interactive event loop on the interpreter")
    rp.add_argument("file")
    rp.set_defaults(fn=_cmd_repl)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except SmaliteError as exc:
        print(f"smalite: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - internal errors
        print(f"smalite: internal error: {exc}", file=sys.stderr)
        return 70


def difftest_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="smalite-difftest",
        description="interpreter-vs-VM differential testing campaign",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--count", type=int, default=100)
    parser.add_argument("--junit", metavar="FILE", help="write a JUnit result file")
    args = parser.parse_args(argv)
    result = run_campaign(seed=args.seed, count=args.count, cfg=GenConfig())
    print(
        f"{result.passed}/{result.total} passed,"
        f" acceptance rate {result.acceptance_rate:.2f}"
    )
    for v in result.failures:
        print("FAIL:", v.detail)
        print(v.program_dump, end="")
        print("trace:")
        for ev in v.trace:
            print(" ", ev)
    if args.junit:
        FsPath(args.junit).write_text(junit_xml(result, args.seed))
    return 0 if result.passed == result.total else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
