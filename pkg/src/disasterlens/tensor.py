"""Dense float32 tensor primitives backing every other module.

Tensors are plain ``numpy.ndarray`` objects in C (row-major) order with
dtype float32.  Images and activations use batch-channel-height-width
layout, which keeps im2col patch extraction contiguous.

Determinism: for a given build of numpy/BLAS and a fixed thread count,
every operation here is bit-reproducible run to run.  ``matmul`` delegates
the inner-dimension reduction to BLAS sgemm, whose blocked accumulation
order is fixed for given operand shapes and thread count; the test suite
checks it against a naive ascending-order reference within 1e-6.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

Tensor = np.ndarray

FLOAT = np.float32


class ShapeError(ValueError):
    """A tensor shape violates an operation's preconditions."""


def tensor(shape: Sequence[int], fill: float = 0.0) -> Tensor:
    """Create a float32 tensor of ``shape`` with every element equal to ``fill``.

    Raises ShapeError if any dimension is zero or negative.
    """
    dims = [int(d) for d in shape]
    if not dims or any(d < 1 for d in dims):
        raise ShapeError(f"invalid shape {list(shape)}: all dimensions must be >= 1")
    return np.full(dims, fill, dtype=FLOAT)


def as_tensor(data) -> Tensor:
    """Coerce nested lists / arrays to a contiguous float32 tensor."""
    return np.ascontiguousarray(np.asarray(data, dtype=FLOAT))


def check_tensor(x, rank: int | None = None, name: str = "tensor") -> Tensor:
    """Validate and coerce an array-like input.

    Ensures float32 dtype, contiguous layout and, when ``rank`` is given,
    the expected number of dimensions.  Returns the (possibly converted)
    array; raises ShapeError on a rank mismatch.
    """
    out = np.ascontiguousarray(np.asarray(x, dtype=FLOAT))
    if rank is not None and out.ndim != rank:
        raise ShapeError(f"{name}: expected rank {rank}, got rank {out.ndim} (shape {out.shape})")
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of rank-2 tensors: c[i,j] = sum_p a[i,p] * b[p,j].

    Accumulation happens in float32 at least (BLAS sgemm); the reduction
    order is deterministic for fixed shapes and thread count.
    """
    a = check_tensor(a, rank=2, name="a")
    b = check_tensor(b, rank=2, name="b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    return np.ascontiguousarray(a @ b)


def pad2d(x: Tensor, pad: int) -> Tensor:
    """Zero-pad the two trailing spatial dims of an [n,c,h,w] tensor by ``pad``."""
    x = check_tensor(x, rank=4, name="x")
    if pad < 0:
        raise ShapeError(f"pad2d: pad must be >= 0, got {pad}")
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="constant")


def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    """Output side length of a convolution/pool window sweep.

    Raises ShapeError unless (size + 2*pad - kernel) is a non-negative
    multiple of stride.
    """
    span = size + 2 * pad - kernel
    if span < 0 or span % stride != 0:
        raise ShapeError(
            f"window does not tile input: size={size} kernel={kernel} stride={stride} pad={pad}"
        )
    return span // stride + 1


def im2col(x: Tensor, kernel: int, stride: int, pad: int) -> Tensor:
    """Lower [n,c,h,w] input to a [c*k*k, n*h_out*w_out] patch matrix.

    Column j holds the receptive field of output position j, flattened
    channel-major then patch-row-major; columns iterate batch-major then
    output-row-major.  A GEMM with kernels reshaped to [f, c*k*k] then
    computes the convolution.
    """
    x = check_tensor(x, rank=4, name="x")
    n, c, h, w = x.shape
    h_out = conv_output_size(h, kernel, stride, pad)
    w_out = conv_output_size(w, kernel, stride, pad)
    xp = pad2d(x, pad)
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kernel, kernel), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride, :, :]  # [n, c, h_out, w_out, k, k]
    cols = windows.transpose(1, 4, 5, 0, 2, 3).reshape(c * kernel * kernel, n * h_out * w_out)
    return np.ascontiguousarray(cols, dtype=FLOAT)


def argmax_axis(x: Tensor) -> list[int]:
    """Per-row index of the maximum of a rank-2 tensor; ties break to the lowest index."""
    x = check_tensor(x, rank=2, name="x")
    if x.shape[1] < 1:
        raise ShapeError("argmax_axis: need at least one column")
    return [int(i) for i in np.argmax(x, axis=1)]
