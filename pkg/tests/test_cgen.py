import shutil
import subprocess

import pytest

from smalite import compile_c, compile_ir, interp_dumps, load
from smalite.cgen import emit_c
from smalite.core import Assign, Path, Trigger, double_value, int_value

from conftest import data, golden

P = Path.parse

GCC = shutil.which("gcc") or shutil.which("cc")
needs_cc = pytest.mark.skipif(GCC is None, reason="no C compiler available")


def build(tmp_path, c_source: str):
    src = tmp_path / "prog.c"
    exe = tmp_path / "prog"
    src.write_text(c_source)
    subprocess.run(
        [GCC, "-std=c99", "-O1", "-o", str(exe), str(src)],
        check=True,
        capture_output=True,
    )
    return exe


def run(exe, trace: str) -> str:
    proc = subprocess.run(
        [str(exe)], input=trace, capture_output=True, text=True, check=True
    )
    return proc.stdout


class TestEmission:
    def test_golden_c(self, counter):
        assert compile_c(counter) == golden("counter.c")

    def test_deterministic(self, counter_src):
        assert compile_c(load(counter_src)) == compile_c(load(counter_src))

    def test_is_plain_c99(self, counter):
        text = compile_c(counter)
        assert "__builtin" not in text
        assert text.startswith("#include")


@needs_cc
class TestExecution:
    def test_counter_matches_interpreter(self, tmp_path, counter):
        exe = build(tmp_path, compile_c(counter))
        trace = data("t1.evt")
        assert run(exe, trace) == golden("counter.t1.dump")

    def test_external_assign_and_values(self, tmp_path):
        src = """Component root {
          Int i 7;
          Double d 2.5;
          Bool b false;
          Str s "a\\"b";
          Spike go;
          go -> a; a: last i * 2 =: i;
          i -> c; c: str(i) + "!" =: s;
        }"""
        p = load(src)
        exe = build(tmp_path, compile_c(p))
        events = [
            Trigger(P("root.go")),
            Assign(double_value(0.1), P("root.d")),
            Assign(int_value(-3), P("root.i")),
        ]
        trace = (
            "trigger root.go\n"
            "assign 0.1 root.d\n"
            "assign -3 root.i\n"
        )
        assert run(exe, trace) == interp_dumps(p, events)

    def test_error_reporting_matches_interpreter(self, tmp_path):
        p = load(data("unsafe.smala"))
        exe = build(tmp_path, emit_c(compile_ir(p)))
        out = run(exe, "trigger root.a\n")
        assert out == interp_dumps(p, [Trigger(P("root.a"))])
        assert out.strip().endswith("== error 1 unsafe")

    def test_failed_reaction_rolls_back(self, tmp_path):
        # x := 2 succeeds; the unsafe trigger fails; x keeps its new value
        # because errors abort the whole trace, not individual effects.
        p = load(data("unsafe.smala"))
        exe = build(tmp_path, compile_c(p))
        events = [Assign(int_value(2), P("root.x")), Trigger(P("root.a"))]
        trace = "assign 2 root.x\ntrigger root.a\n"
        assert run(exe, trace) == interp_dumps(p, events)
