"""Toolchain for a tree-structured reactive UI description language:
parser, reference interpreter, static checks, compiler to an object-style
IR with a VM and C backend, plus a differential-testing harness."""

from .core import (
    Assign,
    Event,
    Path,
    Process,
    SmaliteError,
    Trigger,
    Value,
    dump_core,
)
from .elaborate import ElabError, elaborate
from .parser import ParseError, parse, parse_core
from .analysis import Diagnostic, check_all, has_errors
from .compiler import IrObject, compile_program, dump_ir
from .semantics import init, react, run_trace
from .vm import vm_react, vm_reset, vm_run_trace
from .pipeline import (
    CheckFailure,
    Session,
    analyze,
    compile_c,
    compile_ir,
    graph_dot,
    interp_dumps,
    load,
    vm_dumps,
)

__version__ = "0.1.0"

__all__ = [
    "Assign",
    "CheckFailure",
    "Diagnostic",
    "ElabError",
    "Event",
    "IrObject",
    "ParseError",
    "Path",
    "Process",
    "Session",
    "SmaliteError",
    "Trigger",
    "Value",
    "analyze",
    "check_all",
    "compile_c",
    "compile_ir",
    "compile_program",
    "dump_core",
    "dump_ir",
    "elaborate",
    "graph_dot",
    "has_errors",
    "init",
    "interp_dumps",
    "load",
    "parse",
    "parse_core",
    "react",
    "run_trace",
    "vm_dumps",
    "vm_react",
    "vm_reset",
    "vm_run_trace",
    "__version__",
]
