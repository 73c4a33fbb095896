"""Neural-network operations: backbone forwards, head forward/backward, SGD.

The backbone layers (convolution, max-pooling, ReLU) only ever run
forward here; gradients exist solely for the dense head, which is the
one trainable piece of the pipeline.  ``conv2d_forward`` has two routes:
the im2col+GEMM fast path and a naive six-loop reference used to check
it.  Both are part of the public surface and must agree within relative
1e-5.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import FLOAT, ShapeError, Tensor, check_tensor, conv_output_size, im2col, pad2d


class LabelError(ValueError):
    """A class label index falls outside [0, k)."""


@dataclass
class DenseParams:
    """Weights, bias, and momentum state of one dense layer.

    ``weights`` is [in_features, out_features]; ``bias`` is [out_features].
    Velocity tensors mirror the parameter shapes and start at zero.
    """

    weights: Tensor
    bias: Tensor
    velocity_w: Tensor
    velocity_b: Tensor

    def __post_init__(self) -> None:
        self.weights = check_tensor(self.weights, rank=2, name="weights")
        self.bias = check_tensor(self.bias, rank=1, name="bias")
        self.velocity_w = check_tensor(self.velocity_w, rank=2, name="velocity_w")
        self.velocity_b = check_tensor(self.velocity_b, rank=1, name="velocity_b")
        if self.velocity_w.shape != self.weights.shape or self.velocity_b.shape != self.bias.shape:
            raise ShapeError("DenseParams: velocity shapes must match parameter shapes")
        if self.weights.shape[1] != self.bias.shape[0]:
            raise ShapeError(
                f"DenseParams: weights {self.weights.shape} incompatible with bias {self.bias.shape}"
            )

    @property
    def in_features(self) -> int:
        return self.weights.shape[0]

    @property
    def out_features(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "DenseParams":
        return DenseParams(
            self.weights.copy(), self.bias.copy(), self.velocity_w.copy(), self.velocity_b.copy()
        )

    @classmethod
    def init(
        cls,
        in_features: int,
        out_features: int,
        rng: np.random.Generator | None = None,
        scheme: str = "glorot",
    ) -> "DenseParams":
        """Fresh parameters with zero bias and zero velocity.

        ``glorot`` draws weights uniform in +-sqrt(6/(fan_in+fan_out));
        ``zeros`` leaves them at zero (useful for the uniform-logits
        first-epoch check).
        """
        if scheme == "zeros":
            w = np.zeros((in_features, out_features), dtype=FLOAT)
        elif scheme == "glorot":
            if rng is None:
                raise ValueError("glorot init requires an rng")
            limit = np.sqrt(6.0 / (in_features + out_features))
            w = rng.uniform(-limit, limit, size=(in_features, out_features)).astype(FLOAT)
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        zeros_b = np.zeros(out_features, dtype=FLOAT)
        return cls(w, zeros_b, np.zeros_like(w), zeros_b.copy())


def conv2d_forward(
    x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 1, pad: int = 0
) -> Tensor:
    """Cross-correlation of [n,c,h,w] input with [f,c,k,k] kernels plus per-filter bias.

    Fast path: im2col lowering followed by one GEMM.
    """
    x = check_tensor(x, rank=4, name="x")
    kernels = check_tensor(kernels, rank=4, name="kernels")
    bias = check_tensor(bias, rank=1, name="bias")
    n, c, h, w = x.shape
    f, kc, kh, kw = kernels.shape
    if kh != kw:
        raise ShapeError(f"conv2d: kernels must be square, got {kh}x{kw}")
    if kc != c:
        raise ShapeError(f"conv2d: kernel channels {kc} != input channels {c}")
    if bias.shape[0] != f:
        raise ShapeError(f"conv2d: bias length {bias.shape[0]} != filter count {f}")
    h_out = conv_output_size(h, kh, stride, pad)
    w_out = conv_output_size(w, kh, stride, pad)
    cols = im2col(x, kh, stride, pad)  # [c*k*k, n*h_out*w_out]
    out = kernels.reshape(f, c * kh * kw) @ cols  # [f, n*h_out*w_out]
    out += bias[:, None]
    out = out.reshape(f, n, h_out, w_out).transpose(1, 0, 2, 3)
    return np.ascontiguousarray(out, dtype=FLOAT)


def conv2d_forward_reference(
    x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 1, pad: int = 0
) -> Tensor:
    """Naive six-loop convolution; the correctness reference for the fast path."""
    x = check_tensor(x, rank=4, name="x")
    kernels = check_tensor(kernels, rank=4, name="kernels")
    bias = check_tensor(bias, rank=1, name="bias")
    n, c, h, w = x.shape
    f, kc, k, _ = kernels.shape
    if kc != c:
        raise ShapeError(f"conv2d: kernel channels {kc} != input channels {c}")
    h_out = conv_output_size(h, k, stride, pad)
    w_out = conv_output_size(w, k, stride, pad)
    xp = pad2d(x, pad)
    out = np.empty((n, f, h_out, w_out), dtype=FLOAT)
    for i in range(n):
        for j in range(f):
            for oy in range(h_out):
                for ox in range(w_out):
                    acc = np.float64(0.0)
                    for ch in range(c):
                        for ky in range(k):
                            for kx in range(k):
                                acc += (
                                    xp[i, ch, oy * stride + ky, ox * stride + kx]
                                    * kernels[j, ch, ky, kx]
                                )
                    out[i, j, oy, ox] = acc + bias[j]
    return out


def maxpool2d_forward(x: Tensor, window: int, stride: int) -> Tensor:
    """Max over non-padded windows of an [n,c,h,w] tensor."""
    x = check_tensor(x, rank=4, name="x")
    n, c, h, w = x.shape
    h_out = conv_output_size(h, window, stride, 0)
    w_out = conv_output_size(w, window, stride, 0)
    views = np.lib.stride_tricks.sliding_window_view(x, (window, window), axis=(2, 3))
    views = views[:, :, ::stride, ::stride, :, :]
    out = views.max(axis=(4, 5))
    assert out.shape == (n, c, h_out, w_out)
    return np.ascontiguousarray(out, dtype=FLOAT)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(x, 0)."""
    return np.maximum(check_tensor(x), FLOAT(0.0))


def dense_forward(x: Tensor, p: DenseParams) -> Tensor:
    """Affine map x @ W + b with the bias broadcast across rows."""
    x = check_tensor(x, rank=2, name="x")
    if x.shape[1] != p.in_features:
        raise ShapeError(f"dense: input width {x.shape[1]} != in_features {p.in_features}")
    return np.ascontiguousarray(x @ p.weights + p.bias, dtype=FLOAT)


def softmax(logits: Tensor) -> Tensor:
    """Row-wise exp-normalization with max subtraction for overflow safety."""
    logits = check_tensor(logits, rank=2, name="logits")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return np.ascontiguousarray(e / e.sum(axis=1, keepdims=True), dtype=FLOAT)


def _check_labels(labels: Sequence[int], n: int, k: int) -> np.ndarray:
    idx = np.asarray(labels, dtype=np.int64)
    if idx.shape != (n,):
        raise LabelError(f"expected {n} labels, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= k):
        raise LabelError(f"labels must lie in [0, {k})")
    return idx


def cross_entropy(probs: Tensor, labels: Sequence[int]) -> float:
    """Mean negative log-probability of the true class.

    Probabilities are clamped below at 1e-12 so a confidently wrong
    prediction cannot produce an infinite loss.
    """
    probs = check_tensor(probs, rank=2, name="probs")
    n, k = probs.shape
    idx = _check_labels(labels, n, k)
    picked = np.clip(probs[np.arange(n), idx].astype(np.float64), 1e-12, None)
    return float(np.mean(-np.log(picked)))


def softmax_xent_grad(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Gradient of mean cross-entropy(softmax(logits)) w.r.t. the logits.

    Equals (softmax(logits) - one_hot(labels)) / n; combining the two
    stages keeps the computation stable.
    """
    logits = check_tensor(logits, rank=2, name="logits")
    n, k = logits.shape
    idx = _check_labels(labels, n, k)
    grad = softmax(logits).astype(np.float64)
    grad[np.arange(n), idx] -= 1.0
    return np.ascontiguousarray(grad / n, dtype=FLOAT)


def dense_backward(x: Tensor, p: DenseParams, upstream: Tensor):
    """Gradients of a dense layer given upstream dL/dy.

    Returns (dW, dBias, dX) where dW = x^T @ upstream, dBias = column sums
    of upstream, dX = upstream @ W^T.
    """
    x = check_tensor(x, rank=2, name="x")
    upstream = check_tensor(upstream, rank=2, name="upstream")
    if x.shape[0] != upstream.shape[0]:
        raise ShapeError("dense_backward: batch sizes differ")
    if x.shape[1] != p.in_features or upstream.shape[1] != p.out_features:
        raise ShapeError("dense_backward: shapes inconsistent with params")
    d_w = np.ascontiguousarray(x.T @ upstream, dtype=FLOAT)
    d_b = np.ascontiguousarray(upstream.sum(axis=0), dtype=FLOAT)
    d_x = np.ascontiguousarray(upstream @ p.weights.T, dtype=FLOAT)
    return d_w, d_b, d_x


def sgd_update(p: DenseParams, d_w: Tensor, d_b: Tensor, lr: float, momentum: float) -> DenseParams:
    """Momentum SGD step, in place: v <- momentum*v - lr*g; w <- w + v.

    With lr=0 and zero-initialized velocity the parameters are untouched
    bit for bit.  Returns ``p`` for convenience.
    """
    if lr < 0:
        raise ValueError(f"lr must be >= 0, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
    d_w = check_tensor(d_w, rank=2, name="d_w")
    d_b = check_tensor(d_b, rank=1, name="d_b")
    if d_w.shape != p.weights.shape or d_b.shape != p.bias.shape:
        raise ShapeError("sgd_update: gradient shapes must match parameter shapes")
    m = FLOAT(momentum)
    step = FLOAT(lr)
    p.velocity_w *= m
    p.velocity_w -= step * d_w
    p.velocity_b *= m
    p.velocity_b -= step * d_b
    p.weights += p.velocity_w
    p.bias += p.velocity_b
    return p
