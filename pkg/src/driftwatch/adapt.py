"""Self-supervised adaptation of the normalization layer.

Two objectives: batch entropy minimization (TENT style) and marginal
entropy over noise-augmented copies of each input (MEMO style, restricted
to the normalization parameters). Both start from a batch-statistics
refresh: the batch's per-feature mean and spread are folded into
(gamma, beta) so the normalized features match the clean reference
distribution, then gradient descent refines the parameters. The linear
weights and bias are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import AdaptationError, ConfigError, InvalidInputError
from .toymodel import ToyClassifier


@dataclass(frozen=True)
class AdapterParams:
    """The per-feature scale/shift pair adaptation updates."""

    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.gamma)) and np.all(np.isfinite(self.beta))):
            raise InvalidInputError("adapter parameters must be finite")
        if np.any(self.gamma == 0.0):
            raise InvalidInputError("gamma entries must be nonzero")


@dataclass(frozen=True)
class ParamGradient:
    """Gradient with respect to (gamma, beta); entries may be zero."""

    gamma: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class AdaptConfig:
    """Adaptation hyperparameters, pinned for reproducibility.

    ``refresh_stats`` folds the adaptation batch's feature statistics into
    (gamma, beta) before any gradient step; disable it to run pure entropy
    descent from the model's current parameters.
    """

    steps: int = 150
    lr: float = 0.3
    batch_size: int = 32
    augmentations: int = 8
    augment_noise: float = 0.5
    seed: int = 0
    refresh_stats: bool = True
    stat_floor: float = 0.1  # lower bound on batch feature spread

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.batch_size < 2:
            raise ConfigError("batch size must be >= 2")
        if self.augmentations < 2:
            raise ConfigError("augmentation count must be >= 2")


def entropy(probabilities: Sequence[float]) -> float:
    """Shannon entropy -sum(p log p) in nats, with 0*log(0) = 0."""
    p = np.asarray(probabilities, dtype=np.float64)
    if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-6:
        raise InvalidInputError("input is not a probability vector")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(p), 0.0)
    return float(-terms.sum())


def _batch_entropy(model: ToyClassifier, batch: np.ndarray) -> np.ndarray:
    p = model.probabilities(batch)
    logp = np.log(np.maximum(p, 1e-300))
    return -(p * logp).sum(axis=-1)


def _check_batch(batch: np.ndarray) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ConfigError("adaptation requires a batch of at least 2 samples")
    return x


def tent_loss(model: ToyClassifier, batch: np.ndarray) -> float:
    """Mean prediction entropy over the batch."""
    x = _check_batch(batch)
    return float(_batch_entropy(model, x).mean())


def grad_tent(model: ToyClassifier, batch: np.ndarray) -> ParamGradient:
    """Analytic gradient of tent_loss with respect to (gamma, beta).

    Chain rule: dH/dz_k = -p_k (log p_k + H) per sample, pushed through
    the linear layer into the normalization parameters. W and b receive
    no gradient.
    """
    x = _check_batch(batch)
    p = model.probabilities(x)
    logp = np.log(np.maximum(p, 1e-300))
    h = -(p * logp).sum(axis=1, keepdims=True)
    dz = -p * (logp + h)  # (n, K)
    du = dz @ model.weights.T  # (n, d)
    dgamma = (du * x).mean(axis=0)
    dbeta = du.mean(axis=0)
    return ParamGradient(gamma=dgamma, beta=dbeta)


def refresh_statistics(
    model: ToyClassifier, batch: np.ndarray, floor: float = 0.1
) -> tuple[np.ndarray, np.ndarray]:
    """Fold the batch's feature statistics into (gamma, beta).

    Returns parameters under which the batch's features, after
    normalization, match the clean training distribution recorded on the
    model (mean and spread per feature). ``floor`` keeps the rescaling
    bounded when a feature has (near-)zero batch variance, e.g. masked
    coordinates; such a coordinate is effectively imputed at its clean
    mean.
    """
    if model.feature_mean.size == 0 or model.feature_std.size == 0:
        raise InvalidInputError("model carries no clean feature statistics")
    x = _check_batch(batch)
    mu_b = x.mean(axis=0)
    sd_b = np.sqrt(x.var(axis=0) + floor**2)
    scale = model.feature_std / sd_b
    gamma = model.gamma * scale
    beta = model.gamma * (model.feature_mean - mu_b * scale) + model.beta
    return gamma, beta


def _descend(
    model: ToyClassifier,
    batch: np.ndarray,
    config: AdaptConfig,
    loss_fn,
    grad_fn,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient descent on (gamma, beta) with a divergence guard.

    Three consecutive loss increases halve the learning rate; after three
    halvings the descent stops early. A non-finite loss raises
    AdaptationError (the caller's model is immutable and stays valid).
    """
    if config.refresh_stats:
        gamma, beta = refresh_statistics(model, batch, config.stat_floor)
    else:
        gamma, beta = model.gamma.copy(), model.beta.copy()
    work = model.with_params(gamma, beta, model.version_id)
    lr = config.lr
    halvings = 0
    rises = 0
    prev_loss = loss_fn(work, batch)
    if not np.isfinite(prev_loss):
        raise AdaptationError("adaptation loss is non-finite at start")
    for _ in range(config.steps):
        dgamma, dbeta = grad_fn(work, batch)
        gamma = gamma - lr * dgamma
        beta = beta - lr * dbeta
        gamma = np.where(gamma == 0.0, 1e-12, gamma)
        work = work.with_params(gamma, beta, work.version_id)
        loss = loss_fn(work, batch)
        if not np.isfinite(loss):
            raise AdaptationError(f"adaptation diverged (loss={loss})")
        if loss > prev_loss:
            rises += 1
            if rises >= 3:
                halvings += 1
                if halvings > 3:
                    break
                lr *= 0.5
                rises = 0
        else:
            rises = 0
        prev_loss = loss
    return gamma, beta


def adapt_tent(
    model: ToyClassifier,
    batch: np.ndarray,
    config: AdaptConfig = AdaptConfig(),
    version_id: Optional[str] = None,
    cause: Optional[dict] = None,
) -> ToyClassifier:
    """Entropy-minimizing adaptation on an unlabeled batch.

    The batch should come from a single root-cause group. Returns a new
    classifier with updated (gamma, beta); weights and bias are
    bit-identical to the input model's.
    """
    x = _check_batch(batch)

    def loss_fn(m: ToyClassifier, xb: np.ndarray) -> float:
        return float(_batch_entropy(m, xb).mean())

    def grad_fn(m: ToyClassifier, xb: np.ndarray):
        g = grad_tent(m, xb)
        return g.gamma, g.beta

    gamma, beta = _descend(model, x, config, loss_fn, grad_fn)
    return model.with_params(
        gamma, beta, version_id or f"{model.version_id}>tent", cause=cause
    )


def _memo_augment(x: np.ndarray, config: AdaptConfig) -> np.ndarray:
    """Seeded noise augmentations: (aug, n, d) stack of jittered copies."""
    rng = np.random.default_rng(config.seed)
    jitter = config.augment_noise * rng.standard_normal((config.augmentations,) + x.shape)
    return x[None, :, :] + jitter


def memo_loss(model: ToyClassifier, batch: np.ndarray, config: AdaptConfig) -> float:
    """Marginal entropy: entropy of the augmentation-averaged prediction,
    averaged over the batch."""
    x = _check_batch(batch)
    augmented = _memo_augment(x, config)
    p = model.probabilities(augmented)  # (aug, n, K)
    marginal = p.mean(axis=0)
    logp = np.log(np.maximum(marginal, 1e-300))
    return float(-(marginal * logp).sum(axis=-1).mean())


def adapt_memo(
    model: ToyClassifier,
    batch: np.ndarray,
    config: AdaptConfig = AdaptConfig(),
    version_id: Optional[str] = None,
    cause: Optional[dict] = None,
) -> ToyClassifier:
    """Marginal-entropy adaptation restricted to the normalization layer.

    The gradient is taken numerically (central differences over the 2d
    normalization parameters); the augmentation noise is drawn once per
    call from the config seed, so the objective is deterministic during
    descent.
    """
    x = _check_batch(batch)
    augmented = _memo_augment(x, config)

    def loss_of(m: ToyClassifier, _xb: np.ndarray) -> float:
        p = m.probabilities(augmented)
        marginal = p.mean(axis=0)
        logp = np.log(np.maximum(marginal, 1e-300))
        return float(-(marginal * logp).sum(axis=-1).mean())

    def grad_fn(m: ToyClassifier, _xb: np.ndarray):
        step = 1e-5
        dgamma = np.zeros_like(m.gamma)
        dbeta = np.zeros_like(m.beta)
        for j in range(m.gamma.size):
            for arr, out in ((m.gamma, dgamma), (m.beta, dbeta)):
                orig = arr[j]
                arr[j] = orig + step
                hi = loss_of(m, None)
                arr[j] = orig - step
                lo = loss_of(m, None)
                arr[j] = orig
                out[j] = (hi - lo) / (2 * step)
        return dgamma, dbeta

    gamma, beta = _descend(model, x, config, loss_of, grad_fn)
    return model.with_params(
        gamma, beta, version_id or f"{model.version_id}>memo", cause=cause
    )
