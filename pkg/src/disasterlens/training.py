"""Fine-tuning loop for the dense head over frozen-backbone features.

Per epoch: shuffle the training set under a derived seed, walk it in
mini-batches (augmenting each image freshly when enabled), update the
head with momentum SGD, then measure test-set precision.  The head is
snapshotted every epoch so the best epoch can be restored afterwards.

Reported loss semantics: ``EpochMetrics.loss`` is the mean cross-entropy
of the head over the clean (un-augmented) training set measured at the
START of the epoch, before that epoch's updates.  With zero-initialized
head weights this makes epoch 1's loss exactly ln(k) for k classes.
Precision is measured AFTER the epoch's updates, on the clean test set.

Because the backbone is frozen, clean-image features are extracted once
and cached; only augmented batches go through the backbone again.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .arch import ArchitectureSpec
from .data import AugmentationConfig, Sample, augment, decode_image, preprocess
from .network import forward_features, head_logits
from .ops import (
    DenseParams,
    cross_entropy,
    dense_backward,
    dense_forward,
    sgd_update,
    softmax,
    softmax_xent_grad,
)
from .seeding import derived_rng
from .tensor import FLOAT, Tensor, argmax_axis
from .weights import ModelWeights


class TrainingError(RuntimeError):
    """The training contract was violated (empty set, diverged loss, ...)."""


@dataclass
class TrainConfig:
    epochs: int = 35
    batch_size: int = 16
    lr: float = 0.01
    momentum: float = 0.9
    augment: bool = True
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    seed: int = 0
    deterministic: bool = False
    head_init: str = "glorot"  # or "zeros"
    means: tuple[float, float, float] | None = None  # None: module default

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class EpochMetrics:
    epoch: int  # 1-based
    loss: float  # mean training-set cross-entropy at epoch start
    precision: float  # test-set fraction correct after the epoch
    seconds: float  # wall clock for the epoch's update pass

    def __post_init__(self):
        if self.loss < 0 or not 0.0 <= self.precision <= 1.0:
            raise ValueError("loss must be >= 0 and precision in [0, 1]")


@dataclass
class TrainResult:
    head: list[DenseParams]  # snapshot from the best epoch
    metrics: list[EpochMetrics]
    best_epoch: int  # 1-based
    backbone_digest: str


def select_best_epoch(metrics: list[EpochMetrics]) -> int:
    """1-based epoch with the highest test precision; ties go to the earliest."""
    if not metrics:
        raise ValueError("select_best_epoch: empty metrics list")
    best = max(metrics, key=lambda m: (m.precision, -m.epoch))
    return best.epoch


def init_head(spec: ArchitectureSpec, cfg: TrainConfig) -> list[DenseParams]:
    """Fresh head parameters for the spec's dense stack, per the config's scheme."""
    head = []
    for n, i in enumerate(spec.dense_indices()):
        d_in = spec.layer_input_shape(i)[0]
        units = spec.layers[i].units
        rng = derived_rng(cfg.seed, "head-init", n)
        head.append(DenseParams.init(d_in, units, rng=rng, scheme=cfg.head_init))
    return head


def _head_forward_backward(head: list[DenseParams], x: Tensor, labels):
    """Loss, per-layer gradients, through the dense stack."""
    activations = [x]
    for p in head:
        activations.append(dense_forward(activations[-1], p))
    logits = activations[-1]
    loss = cross_entropy(softmax(logits), labels)
    upstream = softmax_xent_grad(logits, labels)
    grads = []
    for p, inp in zip(reversed(head), reversed(activations[:-1])):
        d_w, d_b, upstream = dense_backward(inp, p, upstream)
        grads.append((d_w, d_b))
    grads.reverse()
    return loss, grads


def fit_head(
    head: list[DenseParams],
    epoch_features,  # callable(epoch:int) -> Tensor [n, d]; epoch is 1-based
    train_labels,
    test_features: Tensor,
    test_labels,
    cfg: TrainConfig,
    clean_train_features: Tensor | None = None,
    progress=None,  # callable(EpochMetrics) -> None, invoked after each epoch
) -> tuple[list[list[DenseParams]], list[EpochMetrics]]:
    """Core SGD loop over feature tensors; returns per-epoch head snapshots and metrics.

    ``epoch_features`` supplies that epoch's (possibly augmented) training
    features; ``clean_train_features`` (default: epoch 1's features) is
    the fixed set used for the start-of-epoch loss measurement.
    """
    train_labels = list(train_labels)
    test_labels = list(test_labels)
    n = len(train_labels)
    if n == 0:
        raise TrainingError("training set is empty")
    snapshots: list[list[DenseParams]] = []
    metrics: list[EpochMetrics] = []
    loss_features = clean_train_features
    for epoch in range(1, cfg.epochs + 1):
        feats = epoch_features(epoch)
        if loss_features is None:
            loss_features = feats
        loss = cross_entropy(softmax(head_logits(loss_features, head)), train_labels)
        if not np.isfinite(loss):
            raise TrainingError(f"training diverged: non-finite loss at epoch {epoch}")
        start = time.perf_counter()
        order = derived_rng(cfg.seed, "shuffle", epoch).permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            batch_loss, grads = _head_forward_backward(
                head, feats[idx], [train_labels[i] for i in idx]
            )
            if not np.isfinite(batch_loss):
                raise TrainingError(
                    f"training diverged: non-finite loss at epoch {epoch}, batch {lo // cfg.batch_size}"
                )
            for p, (d_w, d_b) in zip(head, grads):
                sgd_update(p, d_w, d_b, cfg.lr, cfg.momentum)
        seconds = time.perf_counter() - start
        preds = argmax_axis(softmax(head_logits(test_features, head)))
        correct = sum(1 for p, t in zip(preds, test_labels) if p == t)
        precision = correct / len(test_labels) if test_labels else 0.0
        snapshots.append([p.copy() for p in head])
        metrics.append(EpochMetrics(epoch, loss, precision, seconds))
        if progress is not None:
            progress(metrics[-1])
    return snapshots, metrics


def load_clean_images(samples: list[Sample], target: int, means) -> Tensor:
    """Decode and preprocess every sample into one [n,3,target,target] tensor."""
    if not samples:
        raise TrainingError("no samples to load")
    out = np.empty((len(samples), 3, target, target), dtype=FLOAT)
    for i, s in enumerate(samples):
        out[i] = preprocess(decode_image(s.path), target=target, means=means)
    return out


def train_head(
    spec: ArchitectureSpec,
    weights: ModelWeights,
    train_samples: list[Sample],
    test_samples: list[Sample],
    cfg: TrainConfig,
    progress=None,
) -> TrainResult:
    """Full fine-tuning protocol over manifest samples.

    The backbone in ``weights`` is read-only: its digest is asserted
    unchanged across the run.  Returns the best-epoch head snapshot, the
    per-epoch metrics, and that digest.
    """
    from .data import IMAGENET_MEANS

    if not train_samples:
        raise TrainingError("training set is empty")
    if not test_samples:
        raise TrainingError("test set is empty")
    means = cfg.means if cfg.means is not None else IMAGENET_MEANS
    target = spec.input_shape[1]
    if spec.input_shape[1] != spec.input_shape[2]:
        raise TrainingError("spec input must be square for the preprocessing pipeline")

    digest_before = weights.backbone_digest()
    clean_train = load_clean_images(train_samples, target, means)
    clean_test = load_clean_images(test_samples, target, means)
    clean_train_feats = forward_features(spec, weights, clean_train)
    test_feats = forward_features(spec, weights, clean_test)
    train_labels = [s.label for s in train_samples]
    test_labels = [s.label for s in test_samples]

    if cfg.augment and not cfg.augmentation.identity:

        def epoch_features(epoch: int) -> Tensor:
            batch = np.empty_like(clean_train)
            for i in range(clean_train.shape[0]):
                rng = derived_rng(cfg.seed, "augment", cfg.augmentation.seed, epoch, i)
                batch[i] = augment(clean_train[i], cfg.augmentation, rng)
            return forward_features(spec, weights, batch)

    else:

        def epoch_features(epoch: int) -> Tensor:
            return clean_train_feats

    head = init_head(spec, cfg)
    snapshots, metrics = fit_head(
        head,
        epoch_features,
        train_labels,
        test_feats,
        test_labels,
        cfg,
        clean_train_features=clean_train_feats,
        progress=progress,
    )
    digest_after = weights.backbone_digest()
    if digest_after != digest_before:
        raise TrainingError("backbone weights changed during training")
    best = select_best_epoch(metrics)
    return TrainResult(snapshots[best - 1], metrics, best, digest_after)


def write_metrics_csv(metrics: list[EpochMetrics], path, zero_seconds: bool = False) -> None:
    """Emit ``epoch,loss,precision,seconds`` rows.

    ``zero_seconds`` replaces wall-clock times with 0 so deterministic runs
    produce byte-identical files.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "precision", "seconds"])
        for m in metrics:
            secs = 0.0 if zero_seconds else m.seconds
            writer.writerow([m.epoch, f"{m.loss:.6f}", f"{m.precision:.6f}", f"{secs:.3f}"])


def read_metrics_csv(path) -> list[EpochMetrics]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
            "epoch",
            "loss",
            "precision",
            "seconds",
        ]:
            raise ValueError(f"{path}: expected header 'epoch,loss,precision,seconds'")
        return [
            EpochMetrics(int(r["epoch"]), float(r["loss"]), float(r["precision"]), float(r["seconds"]))
            for r in reader
        ]
