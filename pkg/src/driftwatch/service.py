"""Cloud-side monitoring service: ingestion, scheduled analysis, alerts,
adaptation orchestration, and the operator API.

One process owns everything: the drift log, the per-window sample buffers,
the model pool, and the reports/alerts. Ingestion is concurrent; analysis
and adaptation are serialized per window; operator reads take snapshots
and never block ingestion.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .adapt import AdaptConfig, adapt_tent, refresh_statistics
from .driftlog import DriftLog, DriftLogEntry, itemset_key
from .errors import (
    AdaptationError,
    AnalysisRejectedError,
    ConfigError,
    InvalidInputError,
    SchemaError,
)
from .pool import ModelPool, PoolConfig, PoolSnapshot, make_version
from .rca import RootCauseReport, Thresholds, analyze
from .toymodel import ToyClassifier
from .weather import WeatherSchedule

logger = logging.getLogger(__name__)

# (location, timestamp) -> weather label, or None when unknown
WeatherProvider = Callable[[str, float], Optional[str]]


def schedule_weather_provider(schedule: WeatherSchedule) -> WeatherProvider:
    """Offline stand-in for a third-party weather API."""

    def lookup(location: str, timestamp: float) -> Optional[str]:
        day = int(timestamp // 86400.0)
        try:
            return schedule.weather(location, day)
        except InvalidInputError:
            return None

    return lookup


@dataclass(frozen=True)
class ServiceConfig:
    schema: tuple[str, ...] = ("device_id", "location", "weather")
    log_path: Optional[Path] = None
    thresholds: Thresholds = Thresholds()
    adapt: AdaptConfig = AdaptConfig()
    pool_capacity: Optional[int] = 4
    min_adapt_batch: int = 32
    mode: str = "autopilot"
    window_seconds: float = 86400.0
    window_origin: float = 0.0

    def __post_init__(self):
        if self.mode not in ("autopilot", "manual"):
            raise ConfigError(f"mode must be autopilot or manual, got {self.mode!r}")
        if self.window_seconds <= 0:
            raise ConfigError("window_seconds must be positive")


@dataclass
class Alert:
    """One analysis run that produced at least one root cause."""

    alert_id: int
    window_id: int
    causes: list[dict]
    created_at: float
    state: str = "open"  # open | acknowledged | adapted

    def to_payload(self) -> dict:
        return {
            "id": self.alert_id,
            "window_id": self.window_id,
            "causes": self.causes,
            "created_at": self.created_at,
            "state": self.state,
        }


class MonitorService:
    """The end-to-end loop behind the operator API."""

    def __init__(
        self,
        config: ServiceConfig,
        base_model: ToyClassifier,
        weather_provider: Optional[WeatherProvider] = None,
    ):
        self.config = config
        self.base_model = base_model
        self.weather_provider = weather_provider
        self.log = DriftLog(schema=config.schema, path=config.log_path)
        self.pool = ModelPool(
            clean=make_version(base_model, {}, "clean", now=0.0),
            config=PoolConfig(capacity=config.pool_capacity),
        )
        self._samples: list[tuple[frozenset, float, np.ndarray]] = []
        self._reports: dict[int, RootCauseReport] = {}
        self._alerts: list[Alert] = []
        self._closed: set[int] = set()
        self._running_analysis: set[int] = set()
        self._mode = config.mode
        self._audit: list[dict] = []
        self._lock = threading.RLock()

    # -- internals ---------------------------------------------------------

    def _audit_event(self, event: str, **detail) -> None:
        record = {"ts": time.time(), "event": event, **detail}
        with self._lock:
            self._audit.append(record)
        logger.info("%s %s", event, detail)

    def _window_bounds(self, window_id: int) -> tuple[float, float]:
        start = self.config.window_origin + window_id * self.config.window_seconds
        return start, start + self.config.window_seconds

    def _enrich(self, attributes: Mapping[str, str], timestamp: float) -> dict[str, str]:
        attrs = dict(attributes)
        if "weather" in self.config.schema and "weather" not in attrs:
            weather = None
            if self.weather_provider is not None:
                weather = self.weather_provider(attrs.get("location", ""), timestamp)
            attrs["weather"] = weather if weather is not None else "unknown"
        return attrs

    # -- ingestion ---------------------------------------------------------

    def ingest_entry(self, raw: Mapping) -> dict:
        """Validate, enrich, and append one drift log entry."""
        try:
            timestamp = float(raw["timestamp"])
            device_id = str(raw["device_id"])
            model_version_id = str(raw["model_version_id"])
            attributes = raw["attributes"]
            drift = raw["drift"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(str(exc), f"malformed entry: missing or bad field {exc}") from exc
        if not isinstance(drift, bool):
            raise SchemaError("drift", "drift must be a boolean")
        if not isinstance(attributes, Mapping):
            raise SchemaError("attributes", "attributes must be a map")
        entry = DriftLogEntry(
            timestamp=timestamp,
            device_id=device_id,
            model_version_id=model_version_id,
            attributes=self._enrich(attributes, timestamp),
            drift=drift,
        )
        entry_id = self.log.append(entry)
        return {"id": entry_id}

    def ingest_sample(
        self, device_id: str, features: Sequence[float], attributes: Mapping[str, str],
        timestamp: Optional[float] = None,
    ) -> dict:
        """Buffer an uplinked input for later adaptation."""
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 1 or feats.shape[0] != self.base_model.n_features:
            raise InvalidInputError(
                f"sample dimension {feats.shape} != model feature dim "
                f"{self.base_model.n_features}"
            )
        ts = float(timestamp) if timestamp is not None else time.time()
        attrs = self._enrich({**attributes, "device_id": device_id}, ts)
        with self._lock:
            self._samples.append((frozenset(itemset_key(attrs)), ts, feats))
            count = len(self._samples)
        return {"buffered": count}

    # -- windows and analysis ----------------------------------------------

    def close_window(self, window_id: int) -> dict:
        """Mark a window closed; in autopilot this triggers analysis."""
        with self._lock:
            already = window_id in self._closed
            self._closed.add(window_id)
            mode = self._mode
        self._audit_event("window_closed", window_id=window_id)
        triggered = False
        if not already and mode == "autopilot":
            self.run_analysis(window_id)
            triggered = True
        return {"window_id": window_id, "analysis_triggered": triggered}

    def run_analysis(self, window_id: int) -> dict:
        """Analyze a closed window; at most one analysis per window persists."""
        with self._lock:
            if window_id not in self._closed:
                raise AnalysisRejectedError(f"window {window_id} is not closed")
            if window_id in self._reports:
                raise AnalysisRejectedError(f"window {window_id} already analyzed")
            if window_id in self._running_analysis:
                raise AnalysisRejectedError(f"analysis for window {window_id} already running")
            self._running_analysis.add(window_id)
            mode = self._mode
        try:
            start, end = self._window_bounds(window_id)
            window = self.log.window(start, end)
            report = analyze(window, self.config.thresholds, window_id=window_id)
        finally:
            with self._lock:
                self._running_analysis.discard(window_id)
        alert: Optional[Alert] = None
        with self._lock:
            self._reports[window_id] = report
            if report.causes:
                alert = Alert(
                    alert_id=len(self._alerts),
                    window_id=window_id,
                    causes=[
                        {
                            "cause_id": f"{window_id}:{i}",
                            "itemset": c.itemset,
                            "risk_ratio": "inf" if c.risk_ratio == float("inf") else c.risk_ratio,
                        }
                        for i, c in enumerate(report.causes)
                    ],
                    created_at=time.time(),
                )
                self._alerts.append(alert)
        self._audit_event(
            "analysis_completed", window_id=window_id, causes=len(report.causes)
        )
        if alert is not None and mode == "autopilot":
            self.trigger_adaptation(window_id)
        return report.to_payload()

    # -- adaptation ---------------------------------------------------------

    def _matching_samples(self, itemset: Mapping[str, str]) -> np.ndarray:
        wanted = set(itemset_key(itemset))
        with self._lock:
            chosen = [f for attrs, _, f in self._samples if wanted <= attrs]
        if not chosen:
            return np.empty((0, 0))
        return np.stack(chosen[:512])

    def _clean_samples(self, itemsets: Sequence[Mapping[str, str]]) -> np.ndarray:
        keys = [set(itemset_key(s)) for s in itemsets]
        with self._lock:
            chosen = [
                f for attrs, _, f in self._samples if not any(k <= attrs for k in keys)
            ]
        if not chosen:
            return np.empty((0, 0))
        return np.stack(chosen[:512])

    def _prune_samples(self, before: float) -> None:
        with self._lock:
            self._samples = [s for s in self._samples if s[1] >= before]

    def trigger_adaptation(
        self, window_id: int, cause_ids: Optional[Sequence[str]] = None
    ) -> dict:
        """Adapt models for (selected) causes of a window's report.

        ``cause_ids=None`` means every cause in the report. Starved causes
        are skipped with a recorded reason; the rest proceed.
        """
        with self._lock:
            report = self._reports.get(window_id)
        if report is None:
            raise AnalysisRejectedError(f"window {window_id} has no report")
        known = {f"{window_id}:{i}": c for i, c in enumerate(report.causes)}
        if cause_ids is None:
            selected = list(known.items())
        else:
            bad = [cid for cid in cause_ids if cid not in known]
            if bad:
                raise InvalidInputError(f"unknown cause ids: {bad}")
            selected = [(cid, known[cid]) for cid in cause_ids]
        adapted: list[dict] = []
        skipped: list[dict] = []
        _, end = self._window_bounds(window_id)
        for cid, cause in selected:
            batch = self._matching_samples(cause.itemset)
            if batch.shape[0] < self.config.min_adapt_batch:
                skipped.append(
                    {"cause_id": cid, "reason": f"starved ({batch.shape[0]} samples)"}
                )
                continue
            vid = f"w{window_id:02d}." + "+".join(
                f"{a}={v}" for a, v in sorted(cause.itemset.items())
            )
            try:
                model = adapt_tent(
                    self.base_model,
                    batch,
                    self.config.adapt,
                    version_id=vid,
                    cause=cause.itemset,
                )
            except AdaptationError as exc:
                skipped.append({"cause_id": cid, "reason": f"diverged: {exc}"})
                continue
            result = self.pool.insert(
                make_version(model, cause.itemset, vid, now=end, risk_ratio=cause.risk_ratio)
            )
            if result.inserted:
                adapted.append({"cause_id": cid, "version_id": vid})
            else:
                skipped.append({"cause_id": cid, "reason": "subsumed by broader version"})
        # Clean slot: statistics-only refresh on residual samples.
        active = [v.itemset for v in self.pool.versions()]
        clean_batch = self._clean_samples(active)
        if clean_batch.shape[0] >= self.config.min_adapt_batch:
            gamma, beta = refresh_statistics(
                self.base_model, clean_batch, self.config.adapt.stat_floor
            )
            vid = f"w{window_id:02d}.clean"
            self.pool.insert(
                make_version(self.base_model.with_params(gamma, beta, vid), {}, vid, now=end)
            )
        start, _ = self._window_bounds(window_id)
        self._prune_samples(start)
        if adapted:
            with self._lock:
                for alert in self._alerts:
                    if alert.window_id == window_id and alert.state != "adapted":
                        alert.state = "adapted"
        self._audit_event(
            "adaptation_completed",
            window_id=window_id,
            adapted=len(adapted),
            skipped=len(skipped),
        )
        return {"adapted": adapted, "skipped": skipped}

    # -- operator API --------------------------------------------------------

    def list_alerts(self) -> list[dict]:
        with self._lock:
            return [a.to_payload() for a in self._alerts]

    def acknowledge_alert(self, alert_id: int) -> dict:
        with self._lock:
            if not (0 <= alert_id < len(self._alerts)):
                raise InvalidInputError(f"no alert {alert_id}")
            alert = self._alerts[alert_id]
            if alert.state == "open":
                alert.state = "acknowledged"
            return alert.to_payload()

    def get_report(self, window_id: int) -> dict:
        with self._lock:
            report = self._reports.get(window_id)
        if report is None:
            raise InvalidInputError(f"window {window_id} has no report")
        return report.to_payload()

    def get_pool(self) -> dict:
        return {
            "capacity": self.config.pool_capacity,
            "versions": self.pool.export_state(),
        }

    def pool_snapshot(self) -> PoolSnapshot:
        """Device-facing replica (live simulation mode)."""
        return self.pool.snapshot()

    def get_mode(self) -> dict:
        with self._lock:
            return {"mode": self._mode}

    def set_mode(self, mode: str) -> dict:
        if mode not in ("autopilot", "manual"):
            raise InvalidInputError(f"mode must be autopilot or manual, got {mode!r}")
        with self._lock:
            old = self._mode
            self._mode = mode
        self._audit_event("mode_changed", old=old, new=mode)
        return {"mode": mode}

    def get_timeline(self, metric: str = "drift_rate") -> dict:
        """Per-window series recomputed from the drift log."""
        if metric not in ("drift_rate", "accuracy_proxy", "entry_count"):
            raise InvalidInputError(f"unknown timeline metric {metric!r}")
        with self._lock:
            known = sorted(set(self._closed) | set(self._reports))
        points = []
        for wid in known:
            start, end = self._window_bounds(wid)
            window = self.log.window(start, end)
            n = len(window)
            flagged = sum(1 for e in window if e.drift)
            if metric == "entry_count":
                value: float = n
            elif n == 0:
                value = 0.0
            elif metric == "drift_rate":
                value = flagged / n
            else:
                value = 1.0 - flagged / n
            points.append({"window_id": wid, "value": value})
        return {"metric": metric, "points": points}

    def audit_events(self) -> list[dict]:
        with self._lock:
            return list(self._audit)
