import math

import numpy as np
import pytest

from driftwatch.driftlog import DriftLog, itemset_key
from driftwatch.errors import InvalidInputError
from driftwatch.rca import (
    RootCause,
    Thresholds,
    analyze,
    compute_metrics,
    counterfactual_filter,
    fim,
    fms,
    set_reduction,
)

from conftest import scenario_window


def _cause(itemset, rr, conf=1.0, sup=0.5, occ=0.2, rank=0):
    return RootCause(
        items=itemset_key(itemset),
        occurrence=occ,
        support=sup,
        confidence=conf,
        risk_ratio=rr,
        rank=rank,
    )


class TestComputeMetrics:
    def test_snow(self, toy_window):
        m = compute_metrics(toy_window, {"weather": "snow"})
        assert (m.occurrence, m.support, m.confidence, m.risk_ratio) == pytest.approx(
            (0.4, 2 / 3, 1.0, 3.0)
        )

    def test_snow_new_york(self, toy_window):
        m = compute_metrics(toy_window, {"weather": "snow", "location": "New York"})
        assert (m.occurrence, m.support, m.confidence, m.risk_ratio) == pytest.approx(
            (0.2, 1 / 3, 1.0, 2.0)
        )

    def test_clear_day(self, toy_window):
        m = compute_metrics(toy_window, {"weather": "clear-day"})
        assert (m.occurrence, m.support, m.confidence, m.risk_ratio) == pytest.approx(
            (0.2, 1 / 3, 1 / 3, 1 / 3)
        )

    def test_snow_helsinki_risk_ratio(self, toy_window):
        # worked example: P(drift | {snow, Helsinki}) = 1, P(drift | not) = 1/2
        m = compute_metrics(toy_window, {"weather": "snow", "location": "Helsinki"})
        assert m.risk_ratio == pytest.approx(2.0)

    def test_itemset_matching_everything_has_undefined_risk_ratio(self, toy_window):
        m = compute_metrics(toy_window, {})
        assert m.risk_ratio is None
        assert not m.passes(Thresholds())

    def test_unmatched_itemset_has_undefined_confidence(self, toy_window):
        m = compute_metrics(toy_window, {"weather": "fog"})
        assert m.confidence is None
        assert not m.passes(Thresholds())


class TestFim:
    def test_top_cause_is_snow(self, toy_window):
        ranked = fim(toy_window)
        assert ranked[0].itemset == {"weather": "snow"}
        assert ranked[0].risk_ratio == pytest.approx(3.0)

    def test_reproduces_worked_metric_rows(self, toy_window):
        # the four internally consistent rows of the worked example,
        # within the table's two-significant-figure rounding
        ranked = {c.items: c for c in fim(toy_window)}
        expectations = {
            itemset_key({"weather": "snow"}): (0.4, 0.67, 1.0, 3.0),
            itemset_key({"weather": "snow", "location": "New York"}): (0.2, 0.33, 1.0, 2.0),
            itemset_key({"location": "New York"}): (0.4, 0.67, 0.67, 1.33),
        }
        for key, (occ, sup, conf, rr) in expectations.items():
            c = ranked[key]
            assert c.occurrence == pytest.approx(occ, abs=0.005)
            assert c.support == pytest.approx(sup, abs=0.005)
            assert c.confidence == pytest.approx(conf, abs=0.005)
            assert c.risk_ratio == pytest.approx(rr, abs=0.005)

    def test_clear_day_fails_confidence_threshold(self, toy_window):
        keys = {c.items for c in fim(toy_window)}
        assert itemset_key({"weather": "clear-day"}) not in keys

    def test_all_clean_window_yields_nothing(self, toy_window):
        log = DriftLog(schema=("device_id", "location", "weather"))
        for e in toy_window:
            log.append(
                type(e)(
                    timestamp=e.timestamp,
                    device_id=e.device_id,
                    model_version_id=e.model_version_id,
                    attributes=e.attributes,
                    drift=False,
                )
            )
        assert fim(log.window(0.0, 86400.0)) == []

    def test_respects_max_itemset_size(self, toy_window):
        ranked = fim(toy_window, Thresholds(max_itemset_size=1))
        assert all(len(c.items) == 1 for c in ranked)

    def test_occurrence_pruning_blocks_expansion(self, toy_window):
        # with min_occurrence above every single attribute's occurrence,
        # nothing is expanded and nothing passes
        assert fim(toy_window, Thresholds(min_occurrence=0.9)) == []

    def test_rank_order_is_risk_ratio_descending(self, toy_window):
        ranked = fim(toy_window)
        rrs = [c.risk_ratio for c in ranked]
        assert rrs == sorted(rrs, reverse=True)
        assert [c.rank for c in ranked] == list(range(len(ranked)))

    def test_anti_monotonicity_property(self):
        window, _ = scenario_window(("snow", "rain"), seed=44, n_days=6)
        subs = [
            ({"weather": "snow"}, {"weather": "snow", "location": "Helsinki"}),
            ({"location": "Tibet"}, {"location": "Tibet", "weather": "rain"}),
            (
                {"weather": "rain"},
                {"weather": "rain", "location": "Quebec", "device_id": "android_30"},
            ),
        ]
        for coarse, finer in subs:
            mc = compute_metrics(window, coarse)
            mf = compute_metrics(window, finer)
            assert mf.occurrence <= mc.occurrence + 1e-12
            assert mf.support <= mc.support + 1e-12


class TestSetReduction:
    def test_toy_mapping(self, toy_window):
        groups = set_reduction(fim(toy_window))
        coarse_keys = [g.cause.items for g in groups]
        snow = itemset_key({"weather": "snow"})
        assert coarse_keys[0] == snow
        snow_group = groups[0]
        merged = {c.items for c in snow_group.merged}
        # {snow, New York} folds under {snow}, not under {New York}
        assert itemset_key({"weather": "snow", "location": "New York"}) in merged

    def test_incomparable_singletons_identity(self):
        causes = [
            _cause({"weather": "snow"}, rr=3.0, rank=0),
            _cause({"location": "Tibet"}, rr=2.0, rank=1),
        ]
        groups = set_reduction(causes)
        assert [g.cause.items for g in groups] == [c.items for c in causes]
        assert all(g.merged == [] for g in groups)

    def test_chain_merges_transitively(self):
        causes = [
            _cause({"a": "1"}, rr=3.0, rank=0),
            _cause({"a": "1", "b": "2"}, rr=2.0, rank=1),
            _cause({"a": "1", "b": "2", "c": "3"}, rr=1.5, rank=2),
        ]
        groups = set_reduction(causes)
        assert len(groups) == 1
        assert groups[0].cause.items == itemset_key({"a": "1"})
        assert [c.items for c in groups[0].merged] == [c.items for c in causes[1:]]

    def test_merges_under_highest_ranked_parent(self):
        causes = [
            _cause({"a": "1"}, rr=3.0, rank=0),
            _cause({"b": "2"}, rr=2.0, rank=1),
            _cause({"a": "1", "b": "2"}, rr=1.5, rank=2),
        ]
        groups = set_reduction(causes)
        assert groups[0].merged[0].items == itemset_key({"a": "1", "b": "2"})
        assert groups[1].merged == []

    def test_finer_cause_ranked_above_parent_still_merges(self):
        # rank inversion: the pair outranks its singleton parent but is
        # still folded under it (coarse keys are the attribute-minimal set)
        causes = [
            _cause({"a": "1", "b": "2"}, rr=5.0, rank=0),
            _cause({"a": "1"}, rr=3.0, rank=1),
        ]
        groups = set_reduction(causes)
        assert len(groups) == 1
        assert groups[0].cause.items == itemset_key({"a": "1"})
        assert groups[0].merged[0].items == itemset_key({"a": "1", "b": "2"})


class TestCounterfactual:
    def test_toy_trace_keeps_only_snow(self, toy_window):
        report = analyze(toy_window)
        assert [c.itemset for c in report.causes] == [{"weather": "snow"}]

    def test_eliminated_causes_fail_confidence_after_marking(self, toy_window):
        # after marking snow entries no-drift, both remaining coarse causes
        # keep confidence 1/3 < 0.51
        copy = DriftLog.working_copy(toy_window)
        copy.mark_no_drift({"weather": "snow"})
        for itemset in ({"device_id": "android_21"}, {"location": "New York"}):
            m = compute_metrics(copy, itemset)
            assert m.confidence == pytest.approx(1 / 3)
            assert not m.passes(Thresholds())

    def test_single_cause_covering_all_drift(self):
        window, _ = scenario_window(("fog",), seed=3, n_days=8)
        report = analyze(window)
        assert [c.itemset for c in report.causes] == [{"weather": "fog"}]

    def test_disjoint_causes_both_survive(self):
        window, _ = scenario_window(("snow", "rain"), seed=9, n_days=10)
        report = analyze(window)
        assert {tuple(sorted(c.itemset.items())) for c in report.causes} == {
            (("weather", "rain"),),
            (("weather", "snow"),),
        }

    def test_first_cause_metrics_are_untouched(self, toy_window):
        ranked = fim(toy_window)
        report = analyze(toy_window)
        assert report.causes[0].risk_ratio == ranked[0].risk_ratio
        assert report.causes[0].confidence == ranked[0].confidence

    def test_accepted_causes_pass_thresholds_at_acceptance(self):
        # re-run check: replay the working copy and verify each accepted
        # cause passed against the state at its acceptance
        window, _ = scenario_window(("snow", "rain", "fog"), seed=21, n_days=10)
        thresholds = Thresholds()
        report = analyze(window, thresholds)
        copy = DriftLog.working_copy(window)
        groups = set_reduction(fim(window, thresholds))
        final, _ = counterfactual_filter(groups, copy, thresholds)
        assert [c.items for c in final] == [c.items for c in report.causes]
        for cause in report.causes:
            assert cause.metrics().passes(thresholds)

    def test_coverage_irredundance(self):
        for seed in range(6):
            window, _ = scenario_window(("snow", "rain", "fog"), seed=seed, n_days=8)
            report = analyze(window)
            seen: list[frozenset] = []
            for cause in report.causes:
                drifted = report.accepted_drifted[cause.items]
                assert drifted, "accepted cause explains no drifted entries"
                assert not any(drifted <= prior for prior in seen)
                seen.append(drifted)


class TestAnalyze:
    def test_toy_clean_group_is_first_three_rows(self, toy_window):
        report = analyze(toy_window)
        assert report.clean_indices == [0, 1, 2]
        snow_key = itemset_key({"weather": "snow"})
        assert report.cause_entry_indices[snow_key] == [3, 4]

    def test_all_clean_window(self):
        window, _ = scenario_window((), seed=1, n_days=4)
        report = analyze(window)
        assert report.causes == []
        assert len(report.clean_indices) == len(window)

    def test_deterministic(self, toy_window):
        a = analyze(toy_window, window_id=1)
        b = analyze(toy_window, window_id=1)
        pa, pb = a.to_payload(), b.to_payload()
        pa.pop("wall_time_s"), pb.pop("wall_time_s")
        assert pa == pb

    def test_planted_causes_recovered_exactly(self):
        window, truth = scenario_window(("fog", "rain"), seed=77, n_days=12)
        report = analyze(window)
        assert {c.itemset["weather"] for c in report.causes} == {"fog", "rain"}
        assert fms(truth, report.partition()) == 1.0

    def test_payload_serializes_infinite_risk_ratio(self):
        window, _ = scenario_window(("snow",), seed=5, n_days=8, fpr=0.0)
        report = analyze(window)
        payload = report.to_payload()
        assert payload["causes"][0]["risk_ratio"] == "inf"


class TestFms:
    def test_identical_partitions(self):
        part = {i: i % 3 for i in range(12)}
        assert fms(part, part) == 1.0

    def test_none_scenario_both_all_clean(self):
        a = {i: "clean" for i in range(10)}
        b = {i: "clean" for i in range(10)}
        assert fms(a, b) == 1.0

    def test_brute_force_oracle_on_random_partitions(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            a = {i: int(rng.integers(3)) for i in range(6)}
            b = {i: int(rng.integers(3)) for i in range(6)}
            tp = fp = fn = 0
            for i in range(6):
                for j in range(i + 1, 6):
                    in_a = a[i] == a[j]
                    in_b = b[i] == b[j]
                    tp += in_a and in_b
                    fp += in_b and not in_a
                    fn += in_a and not in_b
            if tp == 0:
                expected = 1.0 if (fp == 0 and fn == 0) else 0.0
            else:
                expected = math.sqrt((tp / (tp + fp)) * (tp / (tp + fn)))
            assert fms(a, b) == pytest.approx(expected, abs=1e-12)

    def test_universe_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            fms({1: "a"}, {2: "a"})

    def test_all_singletons_vs_one_cluster(self):
        a = {i: i for i in range(5)}
        b = {i: "x" for i in range(5)}
        assert fms(a, b) == 0.0


class TestScalability:
    def test_analyze_linear_in_window_size(self):
        import time

        from conftest import synthetic_window

        w1 = synthetic_window(20_000, seed=4)
        w2 = synthetic_window(40_000, seed=4)
        t0 = time.perf_counter()
        analyze(w1)
        t1 = time.perf_counter()
        analyze(w2)
        t2 = time.perf_counter()
        small, large = t1 - t0, t2 - t1
        assert large / small <= 3.0  # generous bound for CI noise at this size
