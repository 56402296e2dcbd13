"""Deterministic fleet workload generator and end-to-end experiment driver.

Simulated devices run inference + drift detection per event; at each
adaptation-window boundary the configured strategy acts (nothing, one
blanket adaptation, or the full analyze/adapt/publish loop). Ground-truth
labels and causes ride a sealed side channel that only the evaluator
reads; detection, analysis, and adaptation see observations only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .adapt import AdaptConfig, adapt_tent, refresh_statistics
from .detection import msp_score
from .driftlog import DriftLog, DriftLogEntry, itemset_key
from .errors import AdaptationError, ConfigError
from .pool import ModelPool, PoolConfig, make_version
from .rca import Thresholds, analyze, fim
from .toymodel import (
    CorruptionSpec,
    SyntheticTask,
    ToyClassifier,
    WEATHER_CORRUPTIONS,
    corrupt,
    default_task,
    train_clean,
)
from .weather import CLEAR, WeatherSchedule

DAY_SECONDS = 86400.0
DEFAULT_LOCATIONS = (
    "New York",
    "Tibet",
    "Beijing",
    "New South Wales",
    "United Kingdom",
    "Quebec",
    "Helsinki",
)
STRATEGIES = ("no-adapt", "adapt-all", "by-cause")
ATTRIBUTE_SCHEMA = ("device_id", "location", "weather")


@dataclass(frozen=True)
class SimConfig:
    """Full deterministic description of a fleet run."""

    locations: tuple[str, ...] = DEFAULT_LOCATIONS
    devices_per_location: int = 16
    arrivals_per_device_day: float = 2.0
    n_days: int = 111
    windows: int = 8
    severity: int = 3
    drift_probability: float = 1.0
    zipf_alpha: float = 0.0
    uplink_fraction: float = 0.10
    seed: int = 0
    msp_threshold: float = 0.9
    min_adapt_batch: int = 32
    pool_capacity: Optional[int] = 4
    rca_mode: str = "full"  # "full" or "fim-only"
    thresholds: Thresholds = Thresholds()
    adapt: AdaptConfig = AdaptConfig()
    task_seed: int = 0
    model_seed: int = 7

    def __post_init__(self):
        if self.windows < 1 or self.n_days < self.windows:
            raise ConfigError("need n_days >= windows >= 1")
        if not (0.0 <= self.uplink_fraction <= 1.0):
            raise ConfigError("uplink fraction must be in [0, 1]")
        if self.rca_mode not in ("full", "fim-only"):
            raise ConfigError(f"unknown rca_mode {self.rca_mode!r}")
        if not (0 <= self.severity <= 5):
            raise ConfigError("severity must be in 0..5")

    @property
    def window_seconds(self) -> float:
        return self.n_days * DAY_SECONDS / self.windows

    def window_of(self, timestamp: float) -> int:
        return min(self.windows - 1, int(timestamp // self.window_seconds))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["locations"] = list(self.locations)
        return d

    @staticmethod
    def from_dict(raw: Mapping) -> "SimConfig":
        raw = dict(raw)
        if "locations" in raw:
            raw["locations"] = tuple(raw["locations"])
        if "thresholds" in raw and isinstance(raw["thresholds"], Mapping):
            raw["thresholds"] = Thresholds(**raw["thresholds"])
        if "adapt" in raw and isinstance(raw["adapt"], Mapping):
            raw["adapt"] = AdaptConfig(**raw["adapt"])
        return SimConfig(**raw)


@dataclass(frozen=True)
class Observation:
    """What a device (and the cloud) may see about one inference."""

    timestamp: float
    device_id: str
    location: str
    weather: str
    features: np.ndarray

    @property
    def attributes(self) -> dict[str, str]:
        return {
            "device_id": self.device_id,
            "location": self.location,
            "weather": self.weather,
        }


@dataclass(frozen=True)
class StreamEvent:
    """Observation plus the sealed evaluation-only ground truth."""

    observation: Observation
    label: int
    true_cause: str  # weather name, or "clean"
    uplink: bool


def _location_class_probs(task: SyntheticTask, alpha: float, seed: int, loc_idx: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 104729, loc_idx])
    ranks = rng.permutation(task.n_classes) + 1
    weights = 1.0 / np.power(ranks.astype(np.float64), alpha)
    return weights / weights.sum()


def generate_stream(
    config: SimConfig,
    task: SyntheticTask,
    schedule: WeatherSchedule,
) -> list[StreamEvent]:
    """Time-ordered labeled event stream with attributes.

    Per device-day: a Poisson number of inferences at uniform times; the
    class drawn from the location's (Zipf-skewed) distribution; the
    feature vector corrupted by the day's weather with the configured
    probability and severity.
    """
    for loc in config.locations:
        if loc not in schedule.table:
            raise ConfigError(f"schedule does not cover location {loc!r}")
    if schedule.n_days < config.n_days:
        raise ConfigError("schedule does not cover the configured date range")

    events: list[StreamEvent] = []
    device_counter = 0
    for loc_idx, loc in enumerate(config.locations):
        class_probs = _location_class_probs(task, config.zipf_alpha, config.seed, loc_idx)
        for di in range(config.devices_per_location):
            device_id = f"android_{device_counter:03d}"
            device_counter += 1
            for day in range(config.n_days):
                rng = np.random.default_rng([config.seed, loc_idx, di, day])
                n = int(rng.poisson(config.arrivals_per_device_day))
                if n == 0:
                    continue
                weather = schedule.weather(loc, day)
                times = np.sort(rng.uniform(0.0, DAY_SECONDS, size=n)) + day * DAY_SECONDS
                labels = rng.choice(task.n_classes, size=n, p=class_probs)
                feats = task.class_means[labels] + task.cov_scale * rng.standard_normal(
                    (n, task.n_features)
                )
                for i in range(n):
                    x = feats[i]
                    cause = "clean"
                    if (
                        weather in WEATHER_CORRUPTIONS
                        and config.severity > 0
                        and rng.random() < config.drift_probability
                    ):
                        spec = CorruptionSpec.for_weather(weather, config.severity)
                        x = corrupt(x, spec, seed=int(rng.integers(2**31)), task=task)
                        cause = weather
                    events.append(
                        StreamEvent(
                            observation=Observation(
                                timestamp=float(times[i]),
                                device_id=device_id,
                                location=loc,
                                weather=weather,
                                features=x,
                            ),
                            label=int(labels[i]),
                            true_cause=cause,
                            uplink=bool(rng.random() < config.uplink_fraction),
                        )
                    )
    events.sort(key=lambda e: (e.observation.timestamp, e.observation.device_id))
    return events


@dataclass
class WindowStats:
    window_id: int
    n_events: int = 0
    n_correct: int = 0
    n_drifted: int = 0
    n_drifted_correct: int = 0
    n_flagged: int = 0
    version_count: int = 0
    adapted_causes: list[str] = field(default_factory=list)

    def accuracy_all(self) -> float:
        return self.n_correct / self.n_events if self.n_events else 0.0

    def accuracy_drifted(self) -> float:
        return self.n_drifted_correct / self.n_drifted if self.n_drifted else 0.0

    def drift_rate(self) -> float:
        return self.n_flagged / self.n_events if self.n_events else 0.0


@dataclass
class CauseEvolution:
    """Detection rates for one cause before and after adaptation."""

    pre_events: int = 0
    pre_flagged: int = 0
    post_events: int = 0
    post_flagged: int = 0

    def pre_rate(self) -> Optional[float]:
        return self.pre_flagged / self.pre_events if self.pre_events else None

    def post_rate(self) -> Optional[float]:
        # A starved cause (never adapted) keeps its pre-adaptation rate.
        if self.post_events == 0:
            return self.pre_rate()
        return self.post_flagged / self.post_events


@dataclass
class SimReport:
    strategy: str
    config: dict
    windows: list[WindowStats]
    accuracy_all: float
    accuracy_drifted: float
    mean_drifted_accuracy_after_first: float
    mean_all_accuracy_after_first: float
    per_cause_accuracy: dict[str, float]
    detection_evolution: dict[str, dict]
    clean_detection_rate: Optional[float]
    skipped_adaptations: list[dict]

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "config": self.config,
            "windows": [
                {
                    "window_id": w.window_id,
                    "n_events": w.n_events,
                    "accuracy_all": w.accuracy_all(),
                    "accuracy_drifted": w.accuracy_drifted(),
                    "drift_rate": w.drift_rate(),
                    "version_count": w.version_count,
                    "adapted_causes": w.adapted_causes,
                }
                for w in self.windows
            ],
            "accuracy_all": self.accuracy_all,
            "accuracy_drifted": self.accuracy_drifted,
            "mean_drifted_accuracy_after_first": self.mean_drifted_accuracy_after_first,
            "mean_all_accuracy_after_first": self.mean_all_accuracy_after_first,
            "per_cause_accuracy": self.per_cause_accuracy,
            "detection_evolution": self.detection_evolution,
            "clean_detection_rate": self.clean_detection_rate,
            "skipped_adaptations": self.skipped_adaptations,
        }

    def report_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class _SampleBuffer:
    """Uplinked feature payloads awaiting adaptation, keyed by attributes.

    Samples are shared by every cause they match (a snow-in-Helsinki
    sample serves both {snow} and {snow, Helsinki}) and expire one full
    window after arrival, so a cause starved in one window can still adapt
    in the next.
    """

    MAX_BATCH = 512

    def __init__(self):
        self._items: list[tuple[frozenset, float, np.ndarray]] = []

    def add(self, attributes: Mapping[str, str], timestamp: float, features: np.ndarray) -> None:
        self._items.append((frozenset(itemset_key(attributes)), timestamp, features))

    def __len__(self) -> int:
        return len(self._items)

    def collect(self, itemset: Mapping[str, str]) -> np.ndarray:
        wanted = set(itemset_key(itemset))
        chosen = [f for attrs, _, f in self._items if wanted <= attrs]
        if not chosen:
            return np.empty((0, 0))
        return np.stack(chosen[: self.MAX_BATCH])

    def collect_all(self) -> np.ndarray:
        if not self._items:
            return np.empty((0, 0))
        return np.stack([f for _, _, f in self._items][: self.MAX_BATCH])

    def collect_not_matching(self, itemsets: Sequence[Mapping[str, str]]) -> np.ndarray:
        keys = [set(itemset_key(s)) for s in itemsets]
        chosen = [
            f
            for attrs, _, f in self._items
            if not any(k <= attrs for k in keys)
        ]
        if not chosen:
            return np.empty((0, 0))
        return np.stack(chosen[: self.MAX_BATCH])

    def prune_before(self, timestamp: float) -> None:
        self._items = [item for item in self._items if item[1] >= timestamp]


def _cause_slug(itemset: Mapping[str, str]) -> str:
    return "+".join(f"{a}={v}" for a, v in sorted(itemset.items()))


# train_clean is deterministic in (task_seed, model_seed); repeated runs
# (e.g. strategy comparisons) reuse the identical pre-trained model.
_model_cache: dict[tuple[int, int], ToyClassifier] = {}


def _base_model(task_seed: int, model_seed: int) -> ToyClassifier:
    key = (task_seed, model_seed)
    if key not in _model_cache:
        _model_cache[key] = train_clean(default_task(seed=task_seed), seed=model_seed)
    return _model_cache[key]


def run(config: SimConfig, strategy: str) -> SimReport:
    """Replay the stream window by window under one strategy.

    Accuracy is scored against the sealed labels; detection, analysis and
    adaptation never see them.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    task = default_task(seed=config.task_seed)
    schedule = WeatherSchedule.generate(config.locations, config.n_days, config.seed)
    base_model = _base_model(config.task_seed, config.model_seed)
    events = generate_stream(config, task, schedule)

    log = DriftLog(schema=ATTRIBUTE_SCHEMA)
    buffer = _SampleBuffer()
    pool = ModelPool(
        clean=make_version(base_model, {}, "clean", now=0.0),
        config=PoolConfig(capacity=config.pool_capacity),
    )
    snapshot = pool.snapshot()
    current_all = base_model  # adapt-all's single continuously adapted model

    stats = [WindowStats(window_id=w) for w in range(config.windows)]
    evolution: dict[str, CauseEvolution] = {}
    clean_w1_events = 0
    clean_w1_flagged = 0
    per_cause_events: dict[str, int] = {}
    per_cause_correct: dict[str, int] = {}
    skipped: list[dict] = []
    current_window = 0

    def close_window(window_id: int) -> None:
        nonlocal snapshot, current_all
        start = window_id * config.window_seconds
        end = (window_id + 1) * config.window_seconds
        ws = stats[window_id]
        if strategy == "no-adapt":
            return
        if strategy == "adapt-all":
            batch = buffer.collect_all()
            if batch.shape[0] < config.min_adapt_batch:
                skipped.append({"window": window_id, "cause": "all", "reason": "starved"})
            else:
                try:
                    current_all = adapt_tent(
                        current_all, batch, config.adapt, version_id=f"w{window_id:02d}.all"
                    )
                    ws.adapted_causes.append("all")
                except AdaptationError:
                    skipped.append(
                        {"window": window_id, "cause": "all", "reason": "diverged"}
                    )
            buffer.prune_before(start)
            return
        # by-cause: analyze, adapt per cause, refresh the clean model, publish
        window = log.window(start, end)
        if config.rca_mode == "fim-only":
            causes = fim(window, config.thresholds)
        else:
            causes = analyze(window, config.thresholds, window_id=window_id).causes
        for cause in causes:
            itemset = cause.itemset
            slug = _cause_slug(itemset)
            batch = buffer.collect(itemset)
            if batch.shape[0] < config.min_adapt_batch:
                skipped.append({"window": window_id, "cause": slug, "reason": "starved"})
                continue
            vid = f"w{window_id:02d}.{slug}"
            try:
                adapted = adapt_tent(
                    base_model, batch, config.adapt, version_id=vid, cause=itemset
                )
            except AdaptationError:
                skipped.append({"window": window_id, "cause": slug, "reason": "diverged"})
                continue
            result = pool.insert(
                make_version(adapted, itemset, vid, now=end, risk_ratio=cause.risk_ratio)
            )
            if result.inserted:
                ws.adapted_causes.append(slug)
            else:
                skipped.append({"window": window_id, "cause": slug, "reason": "subsumed"})
        # Clean slot: statistics-only refresh. Entropy descent exists to
        # recover confidence lost to corruption; sharpening on clean data
        # would only blind the detector to future drift.
        active = [v.itemset for v in pool.versions()]
        clean_batch = buffer.collect_not_matching(active)
        if clean_batch.shape[0] >= config.min_adapt_batch:
            gamma, beta = refresh_statistics(base_model, clean_batch, config.adapt.stat_floor)
            refreshed = base_model.with_params(gamma, beta, f"w{window_id:02d}.clean")
            pool.insert(make_version(refreshed, {}, f"w{window_id:02d}.clean", now=end))
        buffer.prune_before(start)
        snapshot = pool.snapshot()

    for event in events:
        obs = event.observation
        w = config.window_of(obs.timestamp)
        while w > current_window:
            stats[current_window].version_count = snapshot.version_count()
            close_window(current_window)
            current_window += 1
        attrs = obs.attributes
        if strategy == "by-cause":
            version = snapshot.select(attrs)
            serving = version.model
            serving_items = version.items
        else:
            serving = current_all if strategy == "adapt-all" else base_model
            serving_items = ()
        probs = serving.probabilities(obs.features)
        msp = float(probs.max())
        flagged = msp < config.msp_threshold
        log.append(
            DriftLogEntry(
                timestamp=obs.timestamp,
                device_id=obs.device_id,
                model_version_id=serving.version_id,
                attributes=attrs,
                drift=flagged,
            )
        )
        if event.uplink:
            buffer.add(attrs, obs.timestamp, obs.features)

        # Evaluation (sealed channel): labels never feed the loop above.
        ws = stats[w]
        correct = int(np.argmax(probs)) == event.label
        ws.n_events += 1
        ws.n_correct += int(correct)
        ws.n_flagged += int(flagged)
        if event.true_cause != "clean":
            ws.n_drifted += 1
            ws.n_drifted_correct += int(correct)
            per_cause_events[event.true_cause] = per_cause_events.get(event.true_cause, 0) + 1
            per_cause_correct[event.true_cause] = per_cause_correct.get(
                event.true_cause, 0
            ) + int(correct)
            evo = evolution.setdefault(event.true_cause, CauseEvolution())
            matched_adapted = len(serving_items) > 0 and set(serving_items) <= set(
                itemset_key(attrs)
            )
            if matched_adapted:
                evo.post_events += 1
                evo.post_flagged += int(flagged)
            elif len(serving_items) == 0:
                evo.pre_events += 1
                evo.pre_flagged += int(flagged)
        elif w == 0:
            clean_w1_events += 1
            clean_w1_flagged += int(flagged)

    stats[current_window].version_count = snapshot.version_count()
    close_window(current_window)

    total_events = sum(s.n_events for s in stats)
    total_correct = sum(s.n_correct for s in stats)
    total_drifted = sum(s.n_drifted for s in stats)
    total_drifted_correct = sum(s.n_drifted_correct for s in stats)
    after_first = stats[1:] if len(stats) > 1 else stats
    drifted_accs = [s.accuracy_drifted() for s in after_first if s.n_drifted > 0]
    all_accs = [s.accuracy_all() for s in after_first if s.n_events > 0]
    return SimReport(
        strategy=strategy,
        config=config.to_dict(),
        windows=stats,
        accuracy_all=total_correct / total_events if total_events else 0.0,
        accuracy_drifted=total_drifted_correct / total_drifted if total_drifted else 0.0,
        mean_drifted_accuracy_after_first=float(np.mean(drifted_accs)) if drifted_accs else 0.0,
        mean_all_accuracy_after_first=float(np.mean(all_accs)) if all_accs else 0.0,
        per_cause_accuracy={
            c: per_cause_correct[c] / per_cause_events[c] for c in sorted(per_cause_events)
        },
        detection_evolution={
            c: {
                "pre_rate": e.pre_rate(),
                "post_rate": e.post_rate(),
                "pre_events": e.pre_events,
                "post_events": e.post_events,
            }
            for c, e in sorted(evolution.items())
        },
        clean_detection_rate=(
            clean_w1_flagged / clean_w1_events if clean_w1_events else None
        ),
        skipped_adaptations=skipped,
    )


def detection_evolution(config: SimConfig) -> dict:
    """Per-cause detection rates before and after adaptation (by-cause run).

    The clean-data rate is the MSP threshold's false-positive rate,
    measured on clean traffic served by the pre-trained model in the first
    window.
    """
    report = run(config, "by-cause")
    return {
        "clean_rate": report.clean_detection_rate,
        "causes": report.detection_evolution,
    }


def run_live(config: SimConfig, service) -> dict:
    """Stream the fleet through a MonitorService's ingestion interface.

    Devices keep detection and model selection local (snapshots pulled
    from the service's published pool) but upload entries without the
    weather attribute, so the service's enrichment path fills it in.
    Window boundaries are reported to the service, which analyzes and
    adapts according to its operating mode.
    """
    task = default_task(seed=config.task_seed)
    schedule = WeatherSchedule.generate(config.locations, config.n_days, config.seed)
    events = generate_stream(config, task, schedule)
    snapshot = service.pool_snapshot()
    current_window = 0
    n_events = 0
    n_correct = 0
    drift_flags = 0
    per_window_rates: list[float] = []
    window_events = 0
    window_flagged = 0
    for event in events:
        obs = event.observation
        w = config.window_of(obs.timestamp)
        while w > current_window:
            service.close_window(current_window)
            snapshot = service.pool_snapshot()
            per_window_rates.append(
                window_flagged / window_events if window_events else 0.0
            )
            window_events = 0
            window_flagged = 0
            current_window += 1
        version = snapshot.select(obs.attributes)
        probs = version.model.probabilities(obs.features)
        flagged = float(probs.max()) < config.msp_threshold
        service.ingest_entry(
            {
                "timestamp": obs.timestamp,
                "device_id": obs.device_id,
                "model_version_id": version.version_id,
                # weather omitted on purpose: the service enriches it
                "attributes": {"device_id": obs.device_id, "location": obs.location},
                "drift": flagged,
            }
        )
        if event.uplink:
            service.ingest_sample(
                obs.device_id,
                obs.features.tolist(),
                {"location": obs.location},
                timestamp=obs.timestamp,
            )
        n_events += 1
        window_events += 1
        n_correct += int(int(np.argmax(probs)) == event.label)
        drift_flags += int(flagged)
        window_flagged += int(flagged)
    service.close_window(current_window)
    per_window_rates.append(window_flagged / window_events if window_events else 0.0)
    return {
        "events": n_events,
        "accuracy": n_correct / n_events if n_events else 0.0,
        "drift_rate": drift_flags / n_events if n_events else 0.0,
        "per_window_drift_rate": per_window_rates,
        "pool": service.get_pool(),
        "alerts": service.list_alerts(),
    }
