"""Forward passes: frozen-backbone feature extraction and head inference.

The backbone (everything up to and including flatten) is read-only; its
weights are never touched by training.  The head is the dense stack after
flatten, carried either as CNWF entries inside a ModelWeights or as a
list of DenseParams while training.
"""

from __future__ import annotations

import numpy as np

from .arch import ArchitectureSpec, ConvLayer, DenseLayer, FlattenLayer, MaxPoolLayer
from .ops import DenseParams, conv2d_forward, dense_forward, maxpool2d_forward, relu, softmax
from .tensor import FLOAT, ShapeError, Tensor, argmax_axis, check_tensor
from .weights import ModelWeights, WeightEntry


def forward_features(
    spec: ArchitectureSpec, weights: ModelWeights, batch: Tensor, batch_size: int = 32
) -> Tensor:
    """Run the backbone on [n,c,h,w] input, returning flattened [n, feature_dim].

    Large batches are processed in chunks of ``batch_size`` to bound the
    im2col working set; chunking does not change the result.
    """
    batch = check_tensor(batch, rank=4, name="batch")
    if tuple(batch.shape[1:]) != spec.input_shape:
        raise ShapeError(
            f"batch shape {tuple(batch.shape[1:])} does not match spec input {spec.input_shape}"
        )
    chunks = []
    for start in range(0, batch.shape[0], batch_size):
        chunks.append(_backbone_chunk(spec, weights, batch[start : start + batch_size]))
    return np.concatenate(chunks, axis=0) if len(chunks) > 1 else chunks[0]


def _backbone_chunk(spec: ArchitectureSpec, weights: ModelWeights, x: Tensor) -> Tensor:
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, ConvLayer):
            x = conv2d_forward(
                x, weights.get(f"{i}.kernels"), weights.get(f"{i}.bias"), layer.stride, layer.pad
            )
            if layer.activation == "relu":
                x = relu(x)
        elif isinstance(layer, MaxPoolLayer):
            x = maxpool2d_forward(x, layer.window, layer.stride)
        elif isinstance(layer, FlattenLayer):
            return np.ascontiguousarray(x.reshape(x.shape[0], -1), dtype=FLOAT)
        else:  # dense: past the backbone
            break
    raise ShapeError("architecture has no flatten layer")  # unreachable for valid specs


def head_params_from_weights(spec: ArchitectureSpec, weights: ModelWeights) -> list[DenseParams]:
    """Materialize the dense stack's parameters from weight entries."""
    head = []
    for i in spec.dense_indices():
        w = weights.get(f"{i}.weights")
        b = weights.get(f"{i}.bias")
        head.append(DenseParams(w.copy(), b.copy(), np.zeros_like(w), np.zeros_like(b)))
    return head


def head_entries(spec: ArchitectureSpec, head: list[DenseParams]) -> list[WeightEntry]:
    """Turn trained head parameters back into weight entries (trainable, not frozen)."""
    indices = spec.dense_indices()
    if len(indices) != len(head):
        raise ShapeError(f"head has {len(head)} layers, spec expects {len(indices)}")
    entries = []
    for i, p in zip(indices, head):
        entries.append(WeightEntry(f"{i}.weights", False, p.weights.copy()))
        entries.append(WeightEntry(f"{i}.bias", False, p.bias.copy()))
    return entries


def head_logits(features: Tensor, head: list[DenseParams]) -> Tensor:
    """Map [n, feature_dim] features through the dense stack to [n, classes] logits."""
    x = check_tensor(features, rank=2, name="features")
    for p in head:
        x = dense_forward(x, p)
    return x


def forward_head(features: Tensor, head: list[DenseParams] | DenseParams) -> Tensor:
    """Class probabilities for a feature batch: softmax over the dense stack's logits."""
    if isinstance(head, DenseParams):
        head = [head]
    return softmax(head_logits(features, head))


def predict(spec: ArchitectureSpec, weights: ModelWeights, batch: Tensor) -> list[int]:
    """Class index per image: argmax of the head probabilities, ties to the lowest index.

    ``weights`` must contain both backbone and head entries.
    """
    features = forward_features(spec, weights, batch)
    probs = forward_head(features, head_params_from_weights(spec, weights))
    return argmax_axis(probs)
