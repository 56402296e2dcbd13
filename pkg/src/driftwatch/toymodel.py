"""Desk-scale classification stand-in: a per-feature affine normalization
layer followed by a linear softmax classifier over Gaussian-mixture
features, plus parametric feature corruptions standing in for weather
drifts.

Only the normalization parameters (gamma, beta) are ever adapted; the
linear weights are frozen after pre-training. Models are immutable after
construction, so prediction is safe from concurrent callers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .detection import softmax
from .errors import ConfigError, InvalidInputError, TrainingError

WEATHER_CORRUPTIONS: dict[str, str] = {
    "rain": "additive-noise",
    "snow": "feature-mask",
    "fog": "scale",
}


@dataclass(frozen=True)
class SyntheticTask:
    """Gaussian-mixture classification task description."""

    n_classes: int
    n_features: int
    class_means: np.ndarray  # (K, d)
    cov_scale: float
    label_probs: np.ndarray  # (K,)

    def __post_init__(self):
        if self.class_means.shape != (self.n_classes, self.n_features):
            raise InvalidInputError("class_means shape must be (K, d)")
        if abs(float(self.label_probs.sum()) - 1.0) > 1e-9:
            raise InvalidInputError("label probabilities must sum to 1")

    @property
    def global_mean(self) -> np.ndarray:
        return self.label_probs @ self.class_means

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw n labeled feature vectors; returns (features, labels)."""
        labels = rng.choice(self.n_classes, size=n, p=self.label_probs)
        feats = self.class_means[labels] + self.cov_scale * rng.standard_normal(
            (n, self.n_features)
        )
        return feats, labels


def default_task(
    n_classes: int = 8,
    n_features: int = 16,
    separation: float = 1.1,
    center_offset: float = 1.2,
    cov_scale: float = 1.0,
    seed: int = 0,
) -> SyntheticTask:
    """Standard task: 8 classes over 16 features with class means drawn
    once from a seeded Gaussian around a nonzero center.

    ``separation`` scales the mean spread; the default puts clean accuracy
    in the mid-90s while leaving severity-3 corruptions clearly harmful.
    The offset center gives contraction-style corruptions a bias component
    that the normalization shift must undo.
    """
    rng = np.random.default_rng(seed)
    means = separation * rng.standard_normal((n_classes, n_features)) + center_offset
    probs = np.full(n_classes, 1.0 / n_classes)
    return SyntheticTask(
        n_classes=n_classes,
        n_features=n_features,
        class_means=means,
        cov_scale=cov_scale,
        label_probs=probs,
    )


@dataclass(frozen=True)
class CorruptionSpec:
    """A named drift cause bound to a corruption kind and severity 1..5."""

    cause: str
    kind: str
    severity: int

    _KINDS = ("shift", "scale", "additive-noise", "feature-mask")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ConfigError(f"unknown corruption kind {self.kind!r}")
        if not (0 <= self.severity <= 5):
            raise ConfigError(f"severity must be in 0..5, got {self.severity}")

    @staticmethod
    def for_weather(weather: str, severity: int) -> "CorruptionSpec":
        kind = WEATHER_CORRUPTIONS.get(weather)
        if kind is None:
            raise ConfigError(f"no corruption bound to weather {weather!r}")
        return CorruptionSpec(cause=weather, kind=kind, severity=severity)


def _cause_rng(cause: str) -> np.random.Generator:
    # Per-cause direction/mask choices are a fixed function of the cause name.
    return np.random.default_rng(abs(hash_cause(cause)) % (2**32))


def hash_cause(cause: str) -> int:
    h = 2166136261
    for ch in cause.encode("utf-8"):
        h = ((h ^ ch) * 16777619) % (2**64)
    return h


def _noise_wash_direction(task: SyntheticTask) -> np.ndarray:
    # The wash pulls inputs toward the blend of the two closest class
    # prototypes, where class posteriors are maximally ambiguous.
    means = task.class_means
    k = task.n_classes
    best = None
    for i in range(k):
        for j in range(i + 1, k):
            dist = float(np.linalg.norm(means[i] - means[j]))
            if best is None or dist < best[0]:
                best = (dist, i, j)
    _, i, j = best
    u = 0.5 * (means[i] + means[j]) - task.global_mean
    return u / np.linalg.norm(u)


def corrupt(
    sample: np.ndarray,
    spec: CorruptionSpec,
    seed: int,
    task: Optional[SyntheticTask] = None,
) -> np.ndarray:
    """Apply the corruption to one sample (or a batch, rows = samples).

    Severity 0 is the identity by convention. Magnitudes grow strictly
    with severity. The direction vector, masked coordinate set, and noisy
    coordinate set are fixed per cause name; only the random noise
    component draws from ``seed``.

    additive-noise is a structured wash: a severity-scaled mean component
    toward the task's most confusable prototype blend plus severity-scaled
    Gaussian spread on a cause-fixed half of the coordinates.
    """
    x = np.asarray(sample, dtype=np.float64)
    if spec.severity == 0:
        return x.copy()
    d = x.shape[-1]
    crng = _cause_rng(spec.cause)
    if spec.kind == "shift":
        direction = crng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        return x + 1.2 * spec.severity * direction
    if spec.kind == "scale":
        center = task.global_mean if task is not None else np.zeros(d)
        factor = 1.0 / (1.0 + 0.8 * spec.severity)
        return center + factor * (x - center)
    if spec.kind == "additive-noise":
        noisy = crng.permutation(d)[: max(1, d // 2)]
        if task is not None:
            wash = _noise_wash_direction(task)
        else:
            wash = crng.standard_normal(d)
            wash /= np.linalg.norm(wash)
        mask = np.zeros(d)
        mask[noisy] = 1.0
        rng = np.random.default_rng(seed)
        noise = 0.4 * spec.severity * rng.standard_normal(x.shape) * mask
        return x + 1.35 * spec.severity * wash + noise
    # feature-mask: zero a severity-scaled fraction of coordinates
    n_masked = min(d, int(np.ceil(0.125 * spec.severity * d)))
    masked = crng.permutation(d)[:n_masked]
    out = x.copy()
    out[..., masked] = 0.0
    return out


@dataclass(frozen=True)
class ToyClassifier:
    """Normalization layer + linear softmax classifier.

    Forward pass: softmax(W.T @ (gamma * x + beta) + b). ``gamma`` and
    ``beta`` are the adaptation handle; ``weights`` and ``bias`` are frozen
    after training. ``clean_msp_reference`` holds held-out clean MSP scores
    for KS-based batch detection.
    """

    gamma: np.ndarray  # (d,)
    beta: np.ndarray  # (d,)
    weights: np.ndarray  # (d, K)
    bias: np.ndarray  # (K,)
    clean_msp_reference: np.ndarray = field(default_factory=lambda: np.empty(0))
    feature_mean: np.ndarray = field(default_factory=lambda: np.empty(0))  # clean reference
    feature_std: np.ndarray = field(default_factory=lambda: np.empty(0))
    version_id: str = "clean"
    cause: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.gamma == 0.0):
            raise InvalidInputError("gamma entries must be nonzero")
        if self.weights.shape[0] != self.gamma.shape[0]:
            raise InvalidInputError("weights rows must match feature dim")

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]

    def logits(self, x: np.ndarray) -> np.ndarray:
        """Forward pass for one sample (d,) or a batch (n, d)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_features:
            raise InvalidInputError(
                f"input dim {x.shape[-1]} != model feature dim {self.n_features}"
            )
        return (self.gamma * x + self.beta) @ self.weights + self.bias

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        z = self.logits(x)
        z = z - z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)

    def with_params(self, gamma: np.ndarray, beta: np.ndarray, version_id: str,
                    cause: Optional[Mapping[str, str]] = None) -> "ToyClassifier":
        return replace(
            self,
            gamma=np.asarray(gamma, dtype=np.float64),
            beta=np.asarray(beta, dtype=np.float64),
            version_id=version_id,
            cause=dict(self.cause if cause is None else cause),
        )

    def to_record(self) -> dict:
        return {
            "version_id": self.version_id,
            "cause": dict(self.cause),
            "gamma": self.gamma.tolist(),
            "beta": self.beta.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "clean_msp_reference": self.clean_msp_reference.tolist(),
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
        }

    @staticmethod
    def from_record(rec: dict) -> "ToyClassifier":
        return ToyClassifier(
            gamma=np.asarray(rec["gamma"], dtype=np.float64),
            beta=np.asarray(rec["beta"], dtype=np.float64),
            weights=np.asarray(rec["weights"], dtype=np.float64),
            bias=np.asarray(rec["bias"], dtype=np.float64),
            clean_msp_reference=np.asarray(rec["clean_msp_reference"], dtype=np.float64),
            feature_mean=np.asarray(rec.get("feature_mean", []), dtype=np.float64),
            feature_std=np.asarray(rec.get("feature_std", []), dtype=np.float64),
            version_id=rec["version_id"],
            cause=rec["cause"],
        )

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_record()))

    @staticmethod
    def load(path: Path) -> "ToyClassifier":
        return ToyClassifier.from_record(json.loads(Path(path).read_text()))


def predict(model: ToyClassifier, sample: np.ndarray) -> np.ndarray:
    """Logit vector for a single sample."""
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("predict takes a single sample; use model.logits for batches")
    return model.logits(x)


def accuracy(model: ToyClassifier, features: np.ndarray, labels: Sequence[int]) -> float:
    """Fraction of samples whose argmax logit matches the label."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.size == 0:
        raise InvalidInputError("accuracy requires a non-empty stream")
    preds = model.logits(feats).argmax(axis=-1)
    return float(np.mean(preds == np.asarray(labels)))


def train_clean(
    task: SyntheticTask,
    seed: int,
    n_per_class: int = 200,
    n_validation: int = 800,
    l2: float = 1e-3,
    lr: float = 8.0,
    max_iters: int = 12000,
    grad_tol: float = 1e-4,
    temperature: float = 1.6,
) -> ToyClassifier:
    """Train the linear layer on clean data until convergence.

    Multinomial logistic regression by full-batch gradient descent with a
    backtracking step size (halve on any loss increase, creep back up on
    success), which converges monotonically on this convex objective. The
    trained logits are divided by ``temperature`` so the softmax stays
    calibrated rather than saturated (the confidence detector needs
    headroom below its threshold). The normalization layer starts at
    identity; labels are only available here, at pre-training time.
    Deterministic for a given seed.

    Raises TrainingError when the gradient has not come under ``grad_tol``
    within ``max_iters``.
    """
    rng = np.random.default_rng(seed)
    k, d = task.n_classes, task.n_features
    per_class = np.repeat(np.arange(k), n_per_class)
    feats = task.class_means[per_class] + task.cov_scale * rng.standard_normal(
        (per_class.size, d)
    )
    onehot = np.eye(k)[per_class]
    n = feats.shape[0]
    max_lr = lr

    def loss_and_grad(wm, bm):
        z = feats @ wm + bm
        z = z - z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        loss = -np.mean(np.log(np.maximum((p * onehot).sum(axis=1), 1e-300)))
        loss += 0.5 * l2 * float((wm * wm).sum())
        err = (p - onehot) / n
        return loss, feats.T @ err + l2 * wm, err.sum(axis=0)

    w = 0.01 * rng.standard_normal((d, k))
    b = np.zeros(k)
    loss, gw, gb = loss_and_grad(w, b)
    last_grad = max(np.abs(gw).max(), np.abs(gb).max())
    for _ in range(max_iters):
        if last_grad < grad_tol:
            break
        w_new = w - lr * gw
        b_new = b - lr * gb
        new_loss, gw_new, gb_new = loss_and_grad(w_new, b_new)
        if new_loss > loss:
            lr *= 0.5
            continue
        w, b, loss, gw, gb = w_new, b_new, new_loss, gw_new, gb_new
        lr = min(lr * 1.2, max_lr)
        last_grad = max(np.abs(gw).max(), np.abs(gb).max())
    else:
        raise TrainingError(
            f"gradient {last_grad:.2e} above tolerance {grad_tol:.0e} "
            f"after {max_iters} iterations (lr={lr}, l2={l2})"
        )

    model = ToyClassifier(
        gamma=np.ones(d),
        beta=np.zeros(d),
        weights=w / temperature,
        bias=b / temperature,
        feature_mean=feats.mean(axis=0),
        feature_std=feats.std(axis=0),
        version_id="clean",
        cause={},
    )
    val_x, _ = task.sample(n_validation, rng)
    probs = model.probabilities(val_x)
    model = replace(model, clean_msp_reference=probs.max(axis=1))
    return model
