"""Versioned pool of by-cause adapted models with LRU consolidation and
attribute-match selection.

The pool holds at most one version per cause itemset plus a pinned clean
model (empty itemset) that is never evicted. Consolidation keeps the pool
an antichain under attribute-set containment: a broader incoming cause
(fewer attributes) evicts subsumed narrower versions, and an incoming
cause narrower than an existing version is refused, since the broader
version already covers its traffic. Capacity overflow evicts the least
recently updated version.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .driftlog import ItemsetKey, itemset_dict, itemset_key
from .errors import ConfigError
from .toymodel import ToyClassifier


@dataclass(frozen=True)
class ModelVersion:
    """One adapted model keyed by its root-cause attribute set."""

    version_id: str
    items: ItemsetKey
    model: ToyClassifier
    created_at: float
    last_updated: float
    risk_ratio_at_creation: float

    @property
    def itemset(self) -> dict[str, str]:
        return itemset_dict(self.items)

    @property
    def is_clean(self) -> bool:
        return len(self.items) == 0

    def summary(self) -> dict:
        rr = self.risk_ratio_at_creation
        return {
            "version_id": self.version_id,
            "itemset": self.itemset,
            "created_at": self.created_at,
            "last_updated": self.last_updated,
            "risk_ratio": "inf" if rr == float("inf") else rr,
        }


@dataclass(frozen=True)
class PoolConfig:
    """Capacity excludes the pinned clean model. ``capacity=None`` disables
    both the capacity bound and subsumption eviction (used by ablations
    that must watch raw version growth)."""

    capacity: Optional[int] = 4

    def __post_init__(self):
        if self.capacity is not None and self.capacity < 1:
            raise ConfigError("pool capacity must be >= 1")


@dataclass
class InsertResult:
    inserted: bool
    replaced: bool
    evicted: list[ModelVersion] = field(default_factory=list)
    refused_by: Optional[ModelVersion] = None


class ModelPool:
    """Single-writer pool; snapshots handed to devices are immutable."""

    def __init__(self, clean: ModelVersion, config: PoolConfig = PoolConfig()):
        if not clean.is_clean:
            raise ConfigError("the pinned model must have an empty cause itemset")
        self.config = config
        self._clean = clean
        self._versions: dict[ItemsetKey, ModelVersion] = {}
        self._lock = threading.Lock()

    @property
    def clean(self) -> ModelVersion:
        return self._clean

    def versions(self) -> list[ModelVersion]:
        """Non-clean versions, most recently updated first."""
        with self._lock:
            return sorted(
                self._versions.values(), key=lambda v: -v.last_updated
            )

    def __len__(self) -> int:
        with self._lock:
            return len(self._versions)

    def insert(self, version: ModelVersion) -> InsertResult:
        """Add or replace a version, applying the consolidation rules.

        1. Same itemset as the pinned clean model or an existing version:
           replace in place, no LRU churn.
        2. Existing versions whose attribute set strictly contains the
           incoming one (narrower coverage) are evicted.
        3. An incoming version whose attribute set strictly contains an
           existing one is refused: the broader version subsumes it.
        4. Capacity overflow evicts least-recently-updated versions.
        Rules 2-4 are skipped when capacity is None.
        """
        with self._lock:
            if version.is_clean:
                old = self._clean
                self._clean = version
                return InsertResult(inserted=True, replaced=True, evicted=[old])
            if version.items in self._versions:
                old = self._versions[version.items]
                self._versions[version.items] = version
                return InsertResult(inserted=True, replaced=True, evicted=[old])
            if self.config.capacity is None:
                self._versions[version.items] = version
                return InsertResult(inserted=True, replaced=False)

            incoming = frozenset(version.items)
            for existing in self._versions.values():
                if frozenset(existing.items) < incoming:
                    return InsertResult(
                        inserted=False, replaced=False, refused_by=existing
                    )
            evicted = [
                v for k, v in self._versions.items() if incoming < frozenset(k)
            ]
            for v in evicted:
                del self._versions[v.items]
            self._versions[version.items] = version
            while len(self._versions) > self.config.capacity:
                oldest = min(self._versions.values(), key=lambda v: v.last_updated)
                del self._versions[oldest.items]
                evicted.append(oldest)
            return InsertResult(inserted=True, replaced=False, evicted=evicted)

    def select(self, attributes: Mapping[str, str]) -> ModelVersion:
        """Pick the version for an input with the given attributes.

        Candidates are versions whose cause itemset is fully contained in
        the input attributes. The winner has the most matching attributes;
        ties break by higher risk ratio at creation, then most recent
        update. With no candidates the clean model serves.
        """
        with self._lock:
            items = set(itemset_key(attributes))
            candidates = [
                v for v in self._versions.values() if set(v.items) <= items
            ]
            if not candidates:
                return self._clean
            return max(
                candidates,
                key=lambda v: (
                    len(v.items),
                    v.risk_ratio_at_creation,
                    v.last_updated,
                ),
            )

    def snapshot(self) -> "PoolSnapshot":
        """Immutable replica shipped to devices; selection logic identical."""
        with self._lock:
            return PoolSnapshot(
                clean=self._clean, versions=tuple(self._versions.values())
            )

    def export_state(self) -> list[dict]:
        """Ordered (most recent first) summaries for the dashboard."""
        rows = [v.summary() for v in self.versions()]
        return [self._clean.summary()] + rows


@dataclass(frozen=True)
class PoolSnapshot:
    """Device-side immutable view of the pool."""

    clean: ModelVersion
    versions: tuple[ModelVersion, ...]

    def select(self, attributes: Mapping[str, str]) -> ModelVersion:
        items = set(itemset_key(attributes))
        candidates = [v for v in self.versions if set(v.items) <= items]
        if not candidates:
            return self.clean
        return max(
            candidates,
            key=lambda v: (len(v.items), v.risk_ratio_at_creation, v.last_updated),
        )

    def version_count(self) -> int:
        return len(self.versions)


def make_version(
    model: ToyClassifier,
    itemset: Mapping[str, str],
    version_id: str,
    now: float,
    risk_ratio: float = 0.0,
    created_at: Optional[float] = None,
) -> ModelVersion:
    return ModelVersion(
        version_id=version_id,
        items=itemset_key(itemset),
        model=model,
        created_at=created_at if created_at is not None else now,
        last_updated=now,
        risk_ratio_at_creation=risk_ratio,
    )