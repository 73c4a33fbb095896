"""disasterlens: aerial disaster-scene classification on a frozen conv backbone.

A self-contained transfer-learning toolkit: a VGG-style convolutional
feature extractor (weights loaded from the CNWF container, never
trained) feeds a dense softmax head fine-tuned on manifest-listed
images, with seeded augmentation, split sweeps, epoch curves, and
confusion-matrix evaluation.  See the ``disasterlens`` CLI for the
operator surface.
"""

from .arch import ArchitectureSpec, ArchError, default_arch, load_arch, parse_arch
from .data import (
    CLASS_NAMES,
    AugmentationConfig,
    ClassLabel,
    Sample,
    SplitSpec,
    augment,
    decode_image,
    load_manifest,
    preprocess,
    split_dataset,
)
from .estimators import FrozenFeatureExtractor, SoftmaxHeadClassifier
from .evaluation import ConfusionMatrix, epoch_curve, evaluate, misclassification_report, split_sweep
from .network import forward_features, forward_head, predict
from .tensor import ShapeError, Tensor
from .training import EpochMetrics, TrainConfig, TrainResult, select_best_epoch, train_head
from .weights import BindError, ModelWeights, WeightsFormatError, load_weights, random_backbone, save_weights

__version__ = "0.1.0"

__all__ = [
    "ArchError",
    "ArchitectureSpec",
    "AugmentationConfig",
    "BindError",
    "CLASS_NAMES",
    "ClassLabel",
    "ConfusionMatrix",
    "EpochMetrics",
    "FrozenFeatureExtractor",
    "ModelWeights",
    "Sample",
    "ShapeError",
    "SoftmaxHeadClassifier",
    "SplitSpec",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "WeightsFormatError",
    "augment",
    "decode_image",
    "default_arch",
    "epoch_curve",
    "evaluate",
    "forward_features",
    "forward_head",
    "load_arch",
    "load_manifest",
    "load_weights",
    "misclassification_report",
    "parse_arch",
    "predict",
    "preprocess",
    "random_backbone",
    "save_weights",
    "select_best_epoch",
    "split_dataset",
    "split_sweep",
    "train_head",
]
