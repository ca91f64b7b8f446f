import random

from smalite.analysis import check_all, has_errors
from smalite.core import Assign, Trigger, dump_core, lookup, transient_paths
from smalite.difftest import (
    GenConfig,
    diff_run,
    gen_program,
    gen_trace,
    junit_xml,
    run_campaign,
)
from smalite.semantics import index_program

from conftest import data


class TestGenerator:
    def test_deterministic_for_a_seed(self):
        cfg = GenConfig()
        p1, _ = gen_program(cfg, random.Random(0))
        p2, _ = gen_program(cfg, random.Random(0))
        assert dump_core(p1) == dump_core(p2)
        t1 = gen_trace(p1, cfg, random.Random(1))
        t2 = gen_trace(p2, cfg, random.Random(1))
        assert t1 == t2

    def test_generated_programs_pass_the_static_checks(self):
        cfg = GenConfig()
        rng = random.Random(42)
        for _ in range(20):
            p, _rejected = gen_program(cfg, rng)
            _, diags = check_all(p)
            assert not has_errors(diags)

    def test_traces_are_admissible_events(self):
        cfg = GenConfig()
        rng = random.Random(7)
        p, _ = gen_program(cfg, rng)
        idx = index_program(p)
        for ev in gen_trace(p, cfg, rng):
            if isinstance(ev, Trigger):
                assert ev.path in idx.transients
            else:
                assert isinstance(ev, Assign)
                assert idx.property_tys[ev.path] is ev.value.ty

    def test_respects_size_knobs(self):
        cfg = GenConfig(n_properties=2, n_spikes=1, n_assignments=1, n_bindings=2,
                        n_switch_components=0, max_trace_len=3)
        rng = random.Random(3)
        p, _ = gen_program(cfg, rng)
        assert len(gen_trace(p, cfg, rng)) <= 3


class TestDiffRun:
    def test_pass_on_generated_pair(self):
        cfg = GenConfig()
        rng = random.Random(5)
        p, _ = gen_program(cfg, rng)
        trace = gen_trace(p, cfg, rng)
        verdict = diff_run(p, trace)
        assert verdict.passed, verdict.detail

    def test_pass_on_counter_scenario(self, counter):
        from smalite.core import Path

        trace = [
            Trigger(Path.parse("root.f._g1.btn1.r.release")),
            Trigger(Path.parse("root.f._g1.btn2.r.release")),
        ]
        verdict = diff_run(counter, trace)
        assert verdict.passed, verdict.detail

    def test_pass_on_failing_trace_with_matching_errors(self):
        # both sides fail identically, which counts as agreement
        from smalite import load
        from smalite.core import Path

        p = load(data("unsafe.smala"))
        verdict = diff_run(p, [Trigger(Path.parse("root.a"))])
        assert verdict.passed, verdict.detail


class TestCampaign:
    def test_small_campaign_all_pass(self):
        result = run_campaign(seed=11, count=50)
        assert result.total == 50
        assert result.passed == 50
        assert result.failures == []
        assert 0.0 < result.acceptance_rate <= 1.0

    def test_campaign_is_reproducible(self):
        a = run_campaign(seed=2, count=10)
        b = run_campaign(seed=2, count=10)
        assert (a.total, a.passed, a.rejected) == (b.total, b.passed, b.rejected)

    def test_junit_output_shape(self):
        result = run_campaign(seed=1, count=5)
        xml = junit_xml(result, seed=1)
        assert xml.startswith('<?xml version="1.0"')
        assert 'tests="5"' in xml
        assert 'failures="0"' in xml
