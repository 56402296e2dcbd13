"""Append-only drift log with windowed queries and itemset counting.

Entries are persisted as newline-delimited JSON, one record per line,
behind a schema header line. The file is only ever appended to; replaying
it after a crash or restart reproduces the identical log.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .errors import InvalidInputError, SchemaError

# Canonical itemset form: attribute pairs sorted by attribute name.
ItemsetKey = tuple[tuple[str, str], ...]


def itemset_key(itemset: Mapping[str, str]) -> ItemsetKey:
    return tuple(sorted(itemset.items()))


def itemset_dict(key: ItemsetKey) -> dict[str, str]:
    return dict(key)


@dataclass(frozen=True)
class DriftLogEntry:
    """One inference's metadata plus its boolean drift verdict."""

    timestamp: float
    device_id: str
    model_version_id: str
    attributes: Mapping[str, str]
    drift: bool

    def matches(self, items: ItemsetKey) -> bool:
        attrs = self.attributes
        return all(attrs.get(a) == v for a, v in items)

    def to_record(self) -> dict:
        return {
            "ts": self.timestamp,
            "device": self.device_id,
            "model": self.model_version_id,
            "attrs": dict(self.attributes),
            "drift": self.drift,
        }

    @staticmethod
    def from_record(rec: dict) -> "DriftLogEntry":
        return DriftLogEntry(
            timestamp=rec["ts"],
            device_id=rec["device"],
            model_version_id=rec["model"],
            attributes=rec["attrs"],
            drift=rec["drift"],
        )


@dataclass(frozen=True)
class LogWindow:
    """Immutable slice of the log covering [start, end), in insertion order."""

    start: float
    end: float
    entries: tuple[DriftLogEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[DriftLogEntry]:
        return iter(self.entries)


def _count(entries: Iterable, items: ItemsetKey, drift: Optional[bool]) -> int:
    n = 0
    for e in entries:
        if drift is not None and e.drift is not drift:
            continue
        if e.matches(items):
            n += 1
    return n


class WorkingWindow:
    """Mutable clone of a window for counterfactual what-ifs.

    Drift flags can be cleared via :meth:`mark_no_drift`; the durable log
    is never touched. Single-owner: not safe to share across threads.
    """

    def __init__(self, window: LogWindow):
        self._attrs = [e.attributes for e in window.entries]
        self._drift = [e.drift for e in window.entries]

    def __len__(self) -> int:
        return len(self._attrs)

    @property
    def drift_flags(self) -> list[bool]:
        return list(self._drift)

    def entry_items(self, idx: int) -> ItemsetKey:
        return itemset_key(self._attrs[idx])

    def is_drifted(self, idx: int) -> bool:
        return self._drift[idx]

    def matching_indices(self, itemset: Mapping[str, str]) -> list[int]:
        items = itemset_key(itemset)
        return [
            i
            for i, attrs in enumerate(self._attrs)
            if all(attrs.get(a) == v for a, v in items)
        ]

    def count(self, itemset: Mapping[str, str], drift: Optional[bool] = None) -> int:
        items = itemset_key(itemset)
        n = 0
        for attrs, flag in zip(self._attrs, self._drift):
            if drift is not None and flag is not drift:
                continue
            if all(attrs.get(a) == v for a, v in items):
                n += 1
        return n

    def mark_no_drift(self, itemset: Mapping[str, str]) -> int:
        """Clear the drift flag on every entry containing ``itemset``.

        Returns the number of flags flipped.
        """
        items = itemset_key(itemset)
        flipped = 0
        for i, attrs in enumerate(self._attrs):
            if self._drift[i] and all(attrs.get(a) == v for a, v in items):
                self._drift[i] = False
                flipped += 1
        return flipped


class DriftLog:
    """Durable append-only store of drift log entries.

    Appends are atomic at record granularity and safe from many threads;
    reads see a consistent prefix. The attribute schema is fixed at
    construction and every entry must carry exactly those attributes.
    """

    def __init__(self, schema: Sequence[str], path: Optional[Path] = None):
        if len(schema) == 0:
            raise InvalidInputError("schema must declare at least one attribute")
        self.schema = tuple(schema)
        self._entries: list[DriftLogEntry] = []
        self._last_ts: dict[str, float] = {}
        self._lock = threading.Lock()
        self._path = Path(path) if path is not None else None
        self._fh = None
        if self._path is not None:
            self._open_file()

    def _open_file(self) -> None:
        exists = self._path.exists() and self._path.stat().st_size > 0
        if exists:
            self._replay()
            self._fh = self._path.open("a", encoding="utf-8")
        else:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self._path.open("w", encoding="utf-8")
            header = {"format": "driftwatch-log", "version": 1, "schema": list(self.schema)}
            self._fh.write(json.dumps(header) + "\n")
            self._fh.flush()

    def _replay(self) -> None:
        with self._path.open("r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if tuple(header.get("schema", ())) != self.schema:
                raise SchemaError(
                    "schema", f"log file schema {header.get('schema')} != declared {list(self.schema)}"
                )
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = DriftLogEntry.from_record(json.loads(line))
                self._entries.append(entry)
                self._last_ts[entry.device_id] = entry.timestamp

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def _validate(self, entry: DriftLogEntry) -> None:
        for name in self.schema:
            if name not in entry.attributes:
                raise SchemaError(name, f"entry missing required attribute {name!r}")
        for name in entry.attributes:
            if name not in self.schema:
                raise SchemaError(name, f"attribute {name!r} not in schema")
            if not isinstance(entry.attributes[name], str):
                raise SchemaError(name, f"attribute {name!r} must be a categorical string")
        last = self._last_ts.get(entry.device_id)
        if last is not None and entry.timestamp < last:
            raise SchemaError(
                "timestamp",
                f"timestamp {entry.timestamp} precedes device {entry.device_id}'s last {last}",
            )

    def append(self, entry: DriftLogEntry) -> int:
        """Durably record ``entry``; returns its id (position in the log)."""
        with self._lock:
            self._validate(entry)
            self._entries.append(entry)
            self._last_ts[entry.device_id] = entry.timestamp
            if self._fh is not None:
                self._fh.write(json.dumps(entry.to_record()) + "\n")
                self._fh.flush()
            return len(self._entries) - 1

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def window(self, start: float, end: float) -> LogWindow:
        """All entries with start <= timestamp < end, in insertion order."""
        if start >= end:
            raise InvalidInputError(f"inverted window range [{start}, {end})")
        with self._lock:
            snapshot = list(self._entries)
        selected = tuple(e for e in snapshot if start <= e.timestamp < end)
        return LogWindow(start=start, end=end, entries=selected)

    @staticmethod
    def count(
        window: LogWindow, itemset: Mapping[str, str], drift: Optional[bool] = None
    ) -> int:
        """Entries in ``window`` containing all of ``itemset``, filtered by drift flag.

        ``drift=None`` counts regardless of the flag.
        """
        return _count(window.entries, itemset_key(itemset), drift)

    @staticmethod
    def working_copy(window: LogWindow) -> WorkingWindow:
        return WorkingWindow(window)
