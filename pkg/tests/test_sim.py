import dataclasses
import json

import numpy as np
import pytest

from driftwatch.errors import ConfigError
from driftwatch.sim import (
    Observation,
    SimConfig,
    StreamEvent,
    generate_stream,
    run,
)
from driftwatch.toymodel import default_task
from driftwatch.weather import CLEAR, WeatherSchedule

SMALL = SimConfig(n_days=16, windows=4, seed=3, devices_per_location=4)


def _stream(config):
    task = default_task(seed=config.task_seed)
    schedule = WeatherSchedule.generate(config.locations, config.n_days, config.seed)
    return generate_stream(config, task, schedule)


class TestGenerateStream:
    def test_time_ordered(self):
        events = _stream(SMALL)
        times = [e.observation.timestamp for e in events]
        assert times == sorted(times)

    def test_expected_event_count_at_default_config(self):
        config = SimConfig(seed=0)
        events = _stream(config)
        expected = (
            len(config.locations)
            * config.devices_per_location
            * config.arrivals_per_device_day
            * config.n_days
        )
        assert expected == pytest.approx(24864)
        assert abs(len(events) - expected) / expected <= 0.05

    def test_zero_drift_probability_makes_everything_clean(self):
        config = dataclasses.replace(SMALL, drift_probability=0.0)
        events = _stream(config)
        assert all(e.true_cause == "clean" for e in events)

    def test_uniform_classes_at_alpha_zero(self):
        config = dataclasses.replace(SMALL, n_days=40, devices_per_location=8)
        events = _stream(config)
        labels = np.array([e.label for e in events])
        task = default_task(seed=config.task_seed)
        counts = np.bincount(labels, minlength=task.n_classes)
        expected = len(labels) / task.n_classes
        # chi-square-ish sanity: all classes within 15% of uniform
        assert np.all(np.abs(counts - expected) / expected < 0.15)

    def test_zipf_alpha_skews_classes(self):
        uniform = _stream(SMALL)
        skewed = _stream(dataclasses.replace(SMALL, zipf_alpha=1.5))
        def top_share(events):
            counts = np.bincount([e.label for e in events], minlength=8)
            return counts.max() / counts.sum()
        assert top_share(skewed) > top_share(uniform) + 0.05

    def test_weather_attribute_matches_schedule(self):
        config = SMALL
        schedule = WeatherSchedule.generate(config.locations, config.n_days, config.seed)
        for e in _stream(config)[:500]:
            day = int(e.observation.timestamp // 86400.0)
            assert e.observation.weather == schedule.weather(e.observation.location, day)

    def test_true_cause_only_on_drift_weather(self):
        for e in _stream(SMALL):
            if e.true_cause != "clean":
                assert e.true_cause == e.observation.weather
            else:
                # drift probability 1.0: clean events happen only on clear days
                assert e.observation.weather == CLEAR

    def test_observation_carries_no_label(self):
        # the sealed evaluation channel is not reachable from observations
        fields = {f.name for f in dataclasses.fields(Observation)}
        assert "label" not in fields
        assert "true_cause" not in fields
        sealed = {f.name for f in dataclasses.fields(StreamEvent)}
        assert {"label", "true_cause"} <= sealed

    def test_deterministic(self):
        a = _stream(SMALL)
        b = _stream(SMALL)
        assert len(a) == len(b)
        for x, y in zip(a[:200], b[:200]):
            assert x.observation.timestamp == y.observation.timestamp
            assert x.label == y.label
            np.testing.assert_array_equal(x.observation.features, y.observation.features)


class TestRun:
    def test_rejects_unknown_strategy(self):
        with pytest.raises(ConfigError):
            run(SMALL, "adapt-everything")

    def test_report_is_deterministic(self):
        a = run(SMALL, "by-cause")
        b = run(SMALL, "by-cause")
        assert a.report_hash() == b.report_hash()

    def test_no_adapt_never_adapts(self):
        report = run(SMALL, "no-adapt")
        assert all(w.adapted_causes == [] for w in report.windows)
        assert all(w.version_count == 0 for w in report.windows)

    def test_per_window_entry_counts_cover_all_events(self):
        events = _stream(SMALL)
        report = run(SMALL, "no-adapt")
        assert sum(w.n_events for w in report.windows) == len(events)

    def test_zero_drift_probability_equalizes_strategies(self):
        config = dataclasses.replace(SMALL, drift_probability=0.0)
        accs = {}
        for strategy in ("no-adapt", "adapt-all", "by-cause"):
            accs[strategy] = run(config, strategy).accuracy_all
        spread = max(accs.values()) - min(accs.values())
        assert spread <= 0.02

    def test_version_count_bounded_by_capacity(self):
        report = run(dataclasses.replace(SMALL, pool_capacity=2), "by-cause")
        assert all(w.version_count <= 2 for w in report.windows)

    def test_report_round_trips_through_json(self):
        report = run(SMALL, "by-cause")
        payload = json.loads(json.dumps(report.to_dict()))
        assert payload["strategy"] == "by-cause"
        assert len(payload["windows"]) == SMALL.windows

    def test_config_round_trip(self):
        config = SimConfig(seed=11, severity=4, zipf_alpha=0.7)
        restored = SimConfig.from_dict(json.loads(json.dumps(config.to_dict())))
        assert restored == config

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SimConfig(n_days=4, windows=8)
        with pytest.raises(ConfigError):
            SimConfig(uplink_fraction=1.5)
        with pytest.raises(ConfigError):
            SimConfig(rca_mode="fancy")
