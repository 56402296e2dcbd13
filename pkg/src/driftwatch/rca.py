"""Root cause analysis over drift log windows.

Pipeline: level-wise (apriori) frequent itemset mining over entry
attributes with four significance metrics, risk-ratio ranking, reduction
of redundant sub-causes into their coarsest passing cause, and an
iterative counterfactual pass that re-tests lower-ranked causes after
virtually un-flagging the entries already explained by accepted ones.

All functions are pure with respect to the durable log: the counterfactual
stage mutates only an in-memory working copy.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Hashable, Mapping, Optional, Sequence, Union

from .driftlog import (
    DriftLog,
    ItemsetKey,
    LogWindow,
    WorkingWindow,
    itemset_dict,
    itemset_key,
)
from .errors import InvalidInputError


@dataclass(frozen=True)
class Thresholds:
    """Minimum metric values an itemset must reach to count as a cause."""

    min_occurrence: float = 0.01
    min_support: float = 0.01
    min_confidence: float = 0.51
    min_risk_ratio: float = 1.1
    max_itemset_size: int = 3


@dataclass(frozen=True)
class Metrics:
    """The four itemset significance metrics.

    occurrence  = |match and drift| / |window|
    support     = |match and drift| / |drift|
    confidence  = |match and drift| / |match|
    risk_ratio  = P(drift | match) / P(drift | no match)

    ``confidence`` is None when the itemset matches nothing; ``risk_ratio``
    is None when the itemset matches everything (no complement to compare
    against) and +inf when the complement has no drift at all.
    """

    occurrence: float
    support: float
    confidence: Optional[float]
    risk_ratio: Optional[float]

    def passes(self, t: Thresholds) -> bool:
        return (
            self.occurrence >= t.min_occurrence
            and self.support >= t.min_support
            and self.confidence is not None
            and self.confidence >= t.min_confidence
            and self.risk_ratio is not None
            and self.risk_ratio >= t.min_risk_ratio
        )


@dataclass(frozen=True)
class RootCause:
    """An attribute itemset with its metrics and rank."""

    items: ItemsetKey
    occurrence: float
    support: float
    confidence: float
    risk_ratio: float
    rank: int

    @property
    def itemset(self) -> dict[str, str]:
        return itemset_dict(self.items)

    def metrics(self) -> Metrics:
        return Metrics(self.occurrence, self.support, self.confidence, self.risk_ratio)


@dataclass
class SetReductionGroup:
    """A coarse cause and the finer causes folded into it."""

    cause: RootCause
    merged: list[RootCause] = field(default_factory=list)


@dataclass
class RootCauseReport:
    """Result of one analysis run over a window."""

    window_id: Optional[Union[int, str]]
    causes: list[RootCause]
    fim_table: list[RootCause]
    matched_counts: dict[ItemsetKey, int]
    cause_entry_indices: dict[ItemsetKey, list[int]]
    clean_indices: list[int]
    accepted_drifted: dict[ItemsetKey, frozenset[int]]
    wall_time_s: float

    def partition(self) -> dict[int, Hashable]:
        """Entry index -> assigned cluster (cause key, or 'clean')."""
        labels: dict[int, Hashable] = {i: "clean" for i in self.clean_indices}
        for key, idxs in self.cause_entry_indices.items():
            for i in idxs:
                labels[i] = key
        return labels

    def to_payload(self) -> dict:
        """Wire form served to the dashboard and operator API."""

        def cause_row(c: RootCause, cause_id: str) -> dict:
            return {
                "cause_id": cause_id,
                "itemset": c.itemset,
                "occurrence": c.occurrence,
                "support": c.support,
                "confidence": c.confidence,
                "risk_ratio": "inf" if math.isinf(c.risk_ratio) else c.risk_ratio,
                "rank": c.rank,
                "matched_entries": self.matched_counts.get(c.items, 0),
            }

        return {
            "window_id": self.window_id,
            "causes": [cause_row(c, f"{self.window_id}:{i}") for i, c in enumerate(self.causes)],
            "fim_table": [
                {
                    "itemset": c.itemset,
                    "occurrence": c.occurrence,
                    "support": c.support,
                    "confidence": c.confidence,
                    "risk_ratio": "inf" if math.isinf(c.risk_ratio) else c.risk_ratio,
                    "rank": c.rank,
                }
                for c in self.fim_table
            ],
            "clean_count": len(self.clean_indices),
            "wall_time_s": self.wall_time_s,
        }


WindowLike = Union[LogWindow, WorkingWindow]


def _window_rows(window: WindowLike) -> tuple[list[ItemsetKey], list[bool]]:
    if isinstance(window, WorkingWindow):
        n = len(window)
        return [window.entry_items(i) for i in range(n)], window.drift_flags
    rows = [itemset_key(e.attributes) for e in window.entries]
    flags = [e.drift for e in window.entries]
    return rows, flags


def compute_metrics(window: WindowLike, itemset: Mapping[str, str]) -> Metrics:
    """The four metrics of ``itemset`` over ``window``.

    Accepts either a durable window or a counterfactual working copy.
    """
    items = itemset_key(itemset)
    rows, flags = _window_rows(window)
    n = len(rows)
    if n == 0:
        raise InvalidInputError("cannot compute metrics on an empty window")
    pairs = set(items)
    match = 0
    match_drift = 0
    drift = 0
    for row, flag in zip(rows, flags):
        is_match = pairs.issubset(row)
        if is_match:
            match += 1
            if flag:
                match_drift += 1
        if flag:
            drift += 1
    occurrence = match_drift / n
    support = match_drift / drift if drift > 0 else 0.0
    confidence = match_drift / match if match > 0 else None
    nonmatch = n - match
    nonmatch_drift = drift - match_drift
    if nonmatch == 0:
        risk_ratio: Optional[float] = None
    elif nonmatch_drift == 0:
        risk_ratio = math.inf if match_drift > 0 else 0.0
    else:
        p_match = match_drift / match if match > 0 else 0.0
        risk_ratio = p_match / (nonmatch_drift / nonmatch)
    return Metrics(occurrence, support, confidence, risk_ratio)


def _rank_key(items: ItemsetKey, m: Metrics):
    # Deterministic ordering: risk ratio desc (inf first), confidence desc,
    # support desc, smaller itemset first, then lexicographic attributes.
    return (-m.risk_ratio, -m.confidence, -m.support, len(items), items)


def fim(window: WindowLike, thresholds: Thresholds = Thresholds()) -> list[RootCause]:
    """All itemsets up to ``max_itemset_size`` passing every threshold, ranked.

    Level-wise apriori: an itemset is only expanded into larger candidates
    when its own occurrence passes ``min_occurrence`` (occurrence is
    anti-monotone, so nothing passing is ever pruned away).
    """
    rows, flags = _window_rows(window)
    n = len(rows)
    drift_total = sum(flags)
    if n == 0 or drift_total == 0:
        return []

    def scan(size: int, candidate_ok) -> dict[ItemsetKey, list[int]]:
        # counts[key] = [matching entries, matching drifted entries]
        counts: dict[ItemsetKey, list[int]] = {}
        decided: dict[ItemsetKey, bool] = {}
        for row, flag in zip(rows, flags):
            for combo in combinations(row, size):
                ok = decided.get(combo)
                if ok is None:
                    ok = candidate_ok(combo)
                    decided[combo] = ok
                if not ok:
                    continue
                c = counts.get(combo)
                if c is None:
                    c = counts[combo] = [0, 0]
                c[0] += 1
                if flag:
                    c[1] += 1
        return counts

    max_size = min(thresholds.max_itemset_size, max(len(r) for r in rows))
    results: list[tuple[ItemsetKey, Metrics]] = []
    frontier: set[ItemsetKey] = set()
    for size in range(1, max_size + 1):
        if size == 1:
            counts = scan(1, lambda combo: True)
        else:
            prev = frontier

            def candidate_ok(combo: ItemsetKey, _prev=prev, _size=size) -> bool:
                return all(sub in _prev for sub in combinations(combo, _size - 1))

            counts = scan(size, candidate_ok)
        frontier = set()
        for key, (match, match_drift) in counts.items():
            occurrence = match_drift / n
            if occurrence >= thresholds.min_occurrence:
                frontier.add(key)
            support = match_drift / drift_total
            confidence = match_drift / match if match > 0 else None
            nonmatch = n - match
            nonmatch_drift = drift_total - match_drift
            if nonmatch == 0:
                risk_ratio: Optional[float] = None
            elif nonmatch_drift == 0:
                risk_ratio = math.inf if match_drift > 0 else 0.0
            else:
                risk_ratio = (match_drift / match) / (nonmatch_drift / nonmatch)
            m = Metrics(occurrence, support, confidence, risk_ratio)
            if m.passes(thresholds):
                results.append((key, m))
        if not frontier:
            break

    results.sort(key=lambda km: _rank_key(km[0], km[1]))
    return [
        RootCause(
            items=key,
            occurrence=m.occurrence,
            support=m.support,
            confidence=m.confidence,
            risk_ratio=m.risk_ratio,
            rank=i,
        )
        for i, (key, m) in enumerate(results)
    ]


def set_reduction(ranked: Sequence[RootCause]) -> list[SetReductionGroup]:
    """Fold each cause into its highest-ranked strictly-coarser passing cause.

    A cause is coarse when no other passing cause's attribute set is a
    strict subset of its own (equivalently: no passing cause has strictly
    broader entry coverage). Output preserves the rank order of the coarse
    causes; each finer cause lands under the highest-ranked coarse parent.
    """
    keysets = {c.items: frozenset(c.items) for c in ranked}
    all_sets = list(keysets.values())
    groups: list[SetReductionGroup] = []
    by_key: dict[ItemsetKey, SetReductionGroup] = {}
    finer: list[RootCause] = []
    for c in ranked:
        cs = keysets[c.items]
        if any(other < cs for other in all_sets):
            finer.append(c)
        else:
            g = SetReductionGroup(cause=c)
            groups.append(g)
            by_key[c.items] = g
    for f in finer:
        fs = keysets[f.items]
        for g in groups:  # groups are in rank order; first hit is highest-ranked
            if keysets[g.cause.items] < fs:
                g.merged.append(f)
                break
    return groups


def counterfactual_filter(
    groups: Sequence[SetReductionGroup],
    working: WorkingWindow,
    thresholds: Thresholds = Thresholds(),
) -> tuple[list[RootCause], dict[ItemsetKey, frozenset[int]]]:
    """Iteratively accept causes that stay significant after earlier ones
    are explained away.

    Coarse causes are popped in rank order. A coarse cause that still
    passes every threshold on the working copy is accepted and its matching
    entries are marked no-drift; otherwise each of its merged finer causes
    is tested against the same copy and appended when it passes. A cause
    whose currently-drifted entries are already wholly covered by an
    accepted cause is redundant and skipped.

    Returns the accepted causes (metrics re-evaluated at acceptance time)
    and, for each, the drifted entry indices it explained when accepted.
    """
    final: list[RootCause] = []
    accepted: dict[ItemsetKey, frozenset[int]] = {}

    def drifted_matches(items: ItemsetKey) -> frozenset[int]:
        idxs = working.matching_indices(itemset_dict(items))
        return frozenset(i for i in idxs if working.is_drifted(i))

    def try_accept(cause: RootCause, mark: bool) -> None:
        m = compute_metrics(working, cause.itemset)
        if not m.passes(thresholds):
            return
        explained = drifted_matches(cause.items)
        if any(explained <= prior for prior in accepted.values()):
            return
        final.append(
            replace(
                cause,
                occurrence=m.occurrence,
                support=m.support,
                confidence=m.confidence,
                risk_ratio=m.risk_ratio,
            )
        )
        accepted[cause.items] = explained
        if mark:
            working.mark_no_drift(cause.itemset)

    pending = list(groups)
    while pending:
        group = pending.pop(0)
        before = len(final)
        try_accept(group.cause, mark=True)
        if len(final) == before:
            for sub in group.merged:
                try_accept(sub, mark=False)
    return final, accepted


def analyze(
    window: LogWindow,
    thresholds: Thresholds = Thresholds(),
    window_id: Optional[Union[int, str]] = None,
) -> RootCauseReport:
    """Full pipeline: fim -> set_reduction -> counterfactual_filter.

    Also partitions the window: every entry is assigned to the first final
    cause (in acceptance order) whose itemset it contains, or to the
    residual clean group.
    """
    t0 = time.perf_counter()
    ranked = fim(window, thresholds)
    groups = set_reduction(ranked)
    working = DriftLog.working_copy(window)
    final, accepted = counterfactual_filter(groups, working, thresholds)

    cause_entry_indices: dict[ItemsetKey, list[int]] = {c.items: [] for c in final}
    clean_indices: list[int] = []
    matched_counts: dict[ItemsetKey, int] = {c.items: 0 for c in final}
    cause_pairs = [(c.items, set(c.items)) for c in final]
    for i, entry in enumerate(window.entries):
        row = set(itemset_key(entry.attributes))
        assigned = False
        for key, pairs in cause_pairs:
            if pairs <= row:
                matched_counts[key] += 1
                if not assigned:
                    cause_entry_indices[key].append(i)
                    assigned = True
        if not assigned:
            clean_indices.append(i)
    return RootCauseReport(
        window_id=window_id,
        causes=final,
        fim_table=ranked,
        matched_counts=matched_counts,
        cause_entry_indices=cause_entry_indices,
        clean_indices=clean_indices,
        accepted_drifted=accepted,
        wall_time_s=time.perf_counter() - t0,
    )


def fms(partition_a: Mapping[Hashable, Hashable], partition_b: Mapping[Hashable, Hashable]) -> float:
    """Fowlkes-Mallows similarity of two partitions of the same universe.

    Pair counting: FMS = sqrt(TP/(TP+FP) * TP/(TP+FN)) where TP counts
    element pairs co-clustered in both partitions, FP pairs co-clustered
    only in the second, FN pairs co-clustered only in the first. Two
    all-singleton (identical) partitions score 1.
    """
    if set(partition_a.keys()) != set(partition_b.keys()):
        raise InvalidInputError("partitions cover different element universes")

    def pairs(n: int) -> int:
        return n * (n - 1) // 2

    cells = Counter((partition_a[k], partition_b[k]) for k in partition_a)
    tp = sum(pairs(v) for v in cells.values())
    together_a = sum(pairs(v) for v in Counter(partition_a.values()).values())
    together_b = sum(pairs(v) for v in Counter(partition_b.values()).values())
    fp = together_b - tp
    fn = together_a - tp
    if tp == 0:
        return 1.0 if (fp == 0 and fn == 0) else 0.0
    return math.sqrt((tp / (tp + fp)) * (tp / (tp + fn)))
