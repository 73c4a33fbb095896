"""Accuracy, confusion matrices, and the experiment harnesses.

``evaluate`` runs the bound model over a clean test set (no augmentation
at evaluation time) and accumulates a rows-are-truth confusion matrix.
``split_sweep`` re-runs the whole training protocol across train/test
ratios; ``epoch_curve`` tabulates a metrics list with the best epoch
flagged; ``misclassification_report`` lists every wrong prediction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .arch import ArchitectureSpec
from .data import CLASS_NAMES, Sample, SplitSpec, split_dataset
from .network import forward_features, forward_head, head_params_from_weights
from .ops import DenseParams
from .seeding import derive_seed
from .tensor import Tensor, argmax_axis
from .training import TrainConfig, EpochMetrics, load_clean_images, select_best_epoch, train_head
from .weights import ModelWeights


class ConfusionMatrix:
    """Square integer counts: rows are true classes, columns predicted ones."""

    def __init__(self, num_classes: int):
        if num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def add(self, true_label: int, predicted: int) -> None:
        self.counts[true_label, predicted] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def trace(self) -> int:
        return int(np.trace(self.counts))

    @property
    def accuracy(self) -> float:
        return self.trace / self.total

    def row_sums(self) -> list[int]:
        return [int(v) for v in self.counts.sum(axis=1)]

    def render(self, names: tuple[str, ...] = CLASS_NAMES) -> str:
        """Plain-text table with class names on both axes."""
        k = self.counts.shape[0]
        labels = [names[i] if i < len(names) else f"class_{i}" for i in range(k)]
        width = max(max(len(l) for l in labels), 5) + 2
        header = " " * width + "".join(l.rjust(width) for l in labels)
        lines = [header]
        for i, l in enumerate(labels):
            row = l.rjust(width) + "".join(str(int(c)).rjust(width) for c in self.counts[i])
            lines.append(row)
        lines.append(f"accuracy: {self.trace}/{self.total} = {self.accuracy:.4f}")
        return "\n".join(lines)


@dataclass
class EvalResult:
    accuracy: float
    confusion: ConfusionMatrix
    predictions: list[int]
    probabilities: Tensor  # [n, k]


def evaluate_features(
    features: Tensor, labels: list[int], head: list[DenseParams], num_classes: int
) -> EvalResult:
    """Confusion matrix and exact trace/total accuracy over precomputed features."""
    if len(labels) == 0:
        raise ValueError("test set is empty")
    probs = forward_head(features, head)
    preds = argmax_axis(probs)
    cm = ConfusionMatrix(num_classes)
    for t, p in zip(labels, preds):
        cm.add(t, p)
    return EvalResult(cm.accuracy, cm, preds, probs)


def evaluate(
    spec: ArchitectureSpec,
    weights: ModelWeights,
    test_samples: list[Sample],
    means=None,
) -> EvalResult:
    """Accuracy and confusion matrix of the bound model on clean test samples."""
    from .data import IMAGENET_MEANS

    if not test_samples:
        raise ValueError("test set is empty")
    target = spec.input_shape[1]
    imgs = load_clean_images(test_samples, target, means if means is not None else IMAGENET_MEANS)
    features = forward_features(spec, weights, imgs)
    head = head_params_from_weights(spec, weights)
    return evaluate_features(features, [s.label for s in test_samples], head, spec.num_classes)


def misclassification_rows(test_samples: list[Sample], result: EvalResult) -> list[tuple]:
    """(path, true name, predicted name, predicted probability) per wrong prediction."""
    rows = []
    for s, pred, probs in zip(test_samples, result.predictions, result.probabilities):
        if pred != s.label:
            rows.append((s.path, _class_name(s.label), _class_name(pred), float(probs[pred])))
    return rows


def _class_name(code: int) -> str:
    return CLASS_NAMES[code] if code < len(CLASS_NAMES) else f"class_{code}"


def write_misclassification_csv(rows: list[tuple], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "true", "predicted", "prob"])
        for p, t, pred, prob in rows:
            writer.writerow([p, t, pred, f"{prob:.6f}"])


def misclassification_report(
    spec: ArchitectureSpec, weights: ModelWeights, test_samples: list[Sample], out_path, means=None
) -> list[tuple]:
    """Evaluate and write the wrong-prediction listing; returns the rows."""
    result = evaluate(spec, weights, test_samples, means=means)
    rows = misclassification_rows(test_samples, result)
    write_misclassification_csv(rows, out_path)
    return rows


DEFAULT_SWEEP_RATIOS = (0.70, 0.75, 0.80, 0.85, 0.90)


def sweep_seed(base_seed: int, ratio: float) -> int:
    """The derived seed a sweep uses for one ratio's split+train run."""
    return derive_seed(base_seed, "sweep", f"{ratio:.4f}")


@dataclass
class SweepRow:
    ratio: float
    accuracy: float  # mean over repeats
    stddev: float  # 0 for a single run


def split_sweep(
    samples: list[Sample],
    spec: ArchitectureSpec,
    weights: ModelWeights,
    cfg: TrainConfig,
    ratios=DEFAULT_SWEEP_RATIOS,
    repeats: int = 1,
) -> list[SweepRow]:
    """Train the full protocol at each train fraction; report best-epoch accuracy.

    Each (ratio, repeat) runs under its own derived seed, so single rows
    are reproducible in isolation.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = []
    for ratio in ratios:
        if not 0.0 < ratio < 1.0:
            raise ValueError(f"ratio {ratio} must lie in (0, 1)")
        accs = []
        for rep in range(repeats):
            seed = sweep_seed(cfg.seed, ratio) if rep == 0 else derive_seed(
                sweep_seed(cfg.seed, ratio), "repeat", rep
            )
            run_cfg = TrainConfig(
                epochs=cfg.epochs,
                batch_size=cfg.batch_size,
                lr=cfg.lr,
                momentum=cfg.momentum,
                augment=cfg.augment,
                augmentation=cfg.augmentation,
                seed=seed,
                deterministic=cfg.deterministic,
                head_init=cfg.head_init,
                means=cfg.means,
            )
            train, test = split_dataset(samples, SplitSpec(train_fraction=ratio, seed=seed))
            result = train_head(spec, weights, train, test, run_cfg)
            accs.append(result.metrics[result.best_epoch - 1].precision)
        rows.append(SweepRow(ratio, float(np.mean(accs)), float(np.std(accs))))
    return rows


def write_sweep_csv(rows: list[SweepRow], path, with_stddev: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ratio", "accuracy", "stddev"] if with_stddev else ["ratio", "accuracy"])
        for r in rows:
            row = [f"{r.ratio:.2f}", f"{r.accuracy:.6f}"]
            if with_stddev:
                row.append(f"{r.stddev:.6f}")
            writer.writerow(row)


@dataclass
class CurveRow:
    epoch: int
    loss: float
    precision: float
    best: bool


def epoch_curve(metrics: list[EpochMetrics]) -> list[CurveRow]:
    """One row per epoch with exactly the earliest-peak epoch flagged best."""
    if not metrics:
        raise ValueError("epoch_curve: empty metrics list")
    best = select_best_epoch(metrics)
    return [CurveRow(m.epoch, m.loss, m.precision, m.epoch == best) for m in metrics]


def write_curve_csv(rows: list[CurveRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "precision", "best"])
        for r in rows:
            writer.writerow([r.epoch, f"{r.loss:.6f}", f"{r.precision:.6f}", int(r.best)])
