"""The validation harness itself: report shapes, reduced-size runs of
every checker, and the bundled corpus registry."""

from stationflow import harness


class TestCorpusRegistry:
    def test_all_programs_load(self):
        for name in harness.RUNNABLE + harness.REJECTED:
            assert harness.corpus_program(name) is not None

    def test_runnable_have_fact_checkers(self):
        assert set(harness.FACT_CHECKS) == set(harness.RUNNABLE)


class TestDeterminism:
    def test_small_sweep_passes(self):
        rep = harness.check_determinism(schedules=4)
        assert rep.ok
        for v in rep.verdicts:
            assert v.agreed == 4 and v.fact_error is None

    def test_report_is_json_serializable(self):
        import json
        rep = harness.check_determinism(("incremental_folding",), schedules=2)
        blob = json.dumps(rep.to_json())
        assert "incremental_folding" in blob


class TestMetatheory:
    def test_short_walks_stay_typed(self):
        rep = harness.check_preservation_progress(total_steps=400)
        assert rep.ok
        assert rep.steps == 400
        assert rep.type_changes == 0
        assert rep.effect_flips == 0
        assert rep.stuck_states == 0


class TestRewriteSoundness:
    def test_sampled_pairs_agree(self):
        rep = harness.check_rewrite_soundness(min_pairs=20)
        assert rep.ok and rep.pairs >= 20


class TestSingleRunHelpers:
    def test_emission_kind_replay(self):
        kinds = harness.eager_emission_kinds("incremental_folding")
        assert kinds == ["fold"]

    def test_reuse_guard_never_offers(self):
        assert harness.reuse_never_offered(seeds=4)
