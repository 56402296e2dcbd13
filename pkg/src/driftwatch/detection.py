"""Per-inference and batch drift detection on model output scores.

Two detectors are provided: a threshold on the maximum softmax probability
(MSP) of a single logit vector, and a two-sample Kolmogorov-Smirnov test
over a batch of scores against a clean reference sample. Both are pure
functions with no shared state and are safe for concurrent callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, InvalidInputError, UndefinedScoreError

DEFAULT_MSP_THRESHOLD = 0.9
DEFAULT_KS_SIGNIFICANCE = 0.05


@dataclass(frozen=True)
class DetectionVerdict:
    """Outcome of a single-inference drift check."""

    drift: bool
    msp: float


@dataclass(frozen=True)
class ConfusionCounts:
    """Detector outcome tallies used for F1 scoring."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise InvalidInputError("confusion counts must be non-negative")


def softmax(logits: Sequence[float]) -> np.ndarray:
    """Numerically stable softmax of a logit vector.

    Subtracts the max entry before exponentiating, so large-magnitude
    logits do not overflow.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise InvalidInputError(f"logit vector must be 1-D with K >= 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("logit vector contains non-finite entries")
    shifted = arr - arr.max()
    exps = np.exp(shifted)
    return exps / exps.sum()


def msp_score(logits: Sequence[float]) -> float:
    """Maximum softmax probability of a logit vector; lies in [1/K, 1]."""
    return float(softmax(logits).max())


def entropy_score(logits: Sequence[float]) -> float:
    """Negative softmax entropy, rescaled to [0, 1] (1 = fully confident).

    Alternative confidence score; not wired as the default detector.
    """
    p = softmax(logits)
    k = p.size
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(p), 0.0)
    return float(1.0 + terms.sum() / math.log(k))


def energy_score(logits: Sequence[float]) -> float:
    """Log-sum-exp of the logits (higher = more confident); unbounded."""
    arr = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("logit vector contains non-finite entries")
    m = arr.max()
    return float(m + np.log(np.exp(arr - m).sum()))


ScoreFn = Callable[[Sequence[float]], float]


def detect_msp(
    logits: Sequence[float],
    threshold: float = DEFAULT_MSP_THRESHOLD,
    score_fn: ScoreFn = msp_score,
) -> DetectionVerdict:
    """Flag drift when the confidence score falls strictly below ``threshold``.

    The comparison is strict: a score exactly equal to the threshold is not
    drift. ``score_fn`` defaults to MSP; entropy_score can be swapped in for
    experiments but shares the same [0, 1] threshold semantics.
    """
    if not (0.0 < threshold < 1.0):
        raise ConfigError(f"threshold must be in (0, 1), got {threshold}")
    score = score_fn(logits)
    return DetectionVerdict(drift=score < threshold, msp=score)


def ks_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sample KS statistic: sup over x of |ECDF_a(x) - ECDF_b(x)|.

    The ECDFs only change at sample points, so the supremum is attained at
    one of the pooled sample values.
    """
    xa = np.sort(np.asarray(a, dtype=np.float64))
    xb = np.sort(np.asarray(b, dtype=np.float64))
    if xa.size == 0 or xb.size == 0:
        raise InvalidInputError("KS statistic requires two non-empty samples")
    pooled = np.concatenate([xa, xb])
    fa = np.searchsorted(xa, pooled, side="right") / xa.size
    fb = np.searchsorted(xb, pooled, side="right") / xb.size
    return float(np.abs(fa - fb).max())


def ks_critical_value(n: int, m: int, significance: float) -> float:
    """Asymptotic two-sample KS rejection threshold c(alpha)*sqrt((n+m)/(n*m))."""
    if not (0.0 < significance < 1.0):
        raise ConfigError(f"significance must be in (0, 1), got {significance}")
    c = math.sqrt(-0.5 * math.log(significance / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def detect_ks(
    batch_scores: Sequence[float],
    reference_scores: Sequence[float],
    significance: float = DEFAULT_KS_SIGNIFICANCE,
) -> bool:
    """Batch-level drift verdict: KS statistic exceeds the critical value.

    ``reference_scores`` are the clean validation MSPs recorded at training
    time. The single boolean applies to the whole batch.
    """
    if len(reference_scores) == 0:
        raise ConfigError("reference score sample is empty")
    if len(batch_scores) == 0:
        raise InvalidInputError("batch must contain at least one score")
    d = ks_statistic(batch_scores, reference_scores)
    return d > ks_critical_value(len(batch_scores), len(reference_scores), significance)


def f1(counts: ConfusionCounts) -> float:
    """F1 = 2*TP / (2*TP + FP + FN)."""
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        raise UndefinedScoreError("F1 undefined: no positives predicted or present")
    return 2.0 * counts.tp / denom
