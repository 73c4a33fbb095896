"""Tensor primitives: creation, GEMM, padding, im2col lowering, argmax."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disasterlens.tensor import (
    FLOAT,
    ShapeError,
    argmax_axis,
    as_tensor,
    check_tensor,
    conv_output_size,
    im2col,
    matmul,
    pad2d,
    tensor,
)


class TestCreate:
    def test_fill_and_shape(self):
        t = tensor([2, 3], fill=0.0)
        assert t.shape == (2, 3)
        assert t.dtype == FLOAT
        assert np.all(t == 0.0)

    def test_singleton(self):
        t = tensor([1], fill=7.5)
        assert t.tolist() == [7.5]

    def test_zero_dimension_rejected(self):
        with pytest.raises(ShapeError):
            tensor([2, 0])

    def test_negative_dimension_rejected(self):
        with pytest.raises(ShapeError):
            tensor([-1, 3])

    def test_empty_shape_rejected(self):
        with pytest.raises(ShapeError):
            tensor([])

    def test_as_tensor_coerces_dtype(self):
        t = as_tensor([[1, 2], [3, 4]])
        assert t.dtype == FLOAT

    def test_check_tensor_rank_mismatch(self):
        with pytest.raises(ShapeError):
            check_tensor(np.zeros((2, 2)), rank=3)


class TestMatmul:
    def test_hand_computed_2x2(self):
        a = as_tensor([[1, 2], [3, 4]])
        b = as_tensor([[5, 6], [7, 8]])
        assert matmul(a, b).tolist() == [[19, 22], [43, 50]]

    def test_identity_left_and_right(self):
        rng = np.random.default_rng(0)
        b = as_tensor(rng.normal(size=(3, 3)))
        eye = as_tensor(np.eye(3))
        assert np.array_equal(matmul(eye, b), b)
        assert np.array_equal(matmul(b, eye), b)

    def test_matches_naive_triple_loop(self):
        rng = np.random.default_rng(1)
        a = as_tensor(rng.normal(size=(4, 7)))
        b = as_tensor(rng.normal(size=(7, 3)))
        want = np.zeros((4, 3), dtype=np.float64)
        for i in range(4):
            for j in range(3):
                for p in range(7):
                    want[i, j] += float(a[i, p]) * float(b[p, j])
        got = matmul(a, b)
        assert np.max(np.abs(got - want)) / np.max(np.abs(want)) < 1e-6

    def test_inner_dim_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(tensor([2, 3]), tensor([4, 2]))

    def test_rank_enforced(self):
        with pytest.raises(ShapeError):
            matmul(tensor([2, 2, 2]), tensor([2, 2]))

    @settings(deadline=None, max_examples=30)
    @given(
        m=st.integers(1, 5),
        k=st.integers(1, 6),
        n=st.integers(1, 5),
        seed=st.integers(0, 2**31),
    )
    def test_matches_float64_einsum(self, m, k, n, seed):
        rng = np.random.default_rng(seed)
        a = as_tensor(rng.normal(size=(m, k)))
        b = as_tensor(rng.normal(size=(k, n)))
        want = np.einsum("ik,kj->ij", a.astype(np.float64), b.astype(np.float64))
        assert np.allclose(matmul(a, b), want, rtol=1e-5, atol=1e-6)


class TestPad2d:
    def test_pad_zero_is_identity(self):
        x = as_tensor(np.arange(8).reshape(1, 2, 2, 2))
        assert pad2d(x, 0) is x

    def test_single_pixel(self):
        x = tensor([1, 1, 1, 1], fill=5.0)
        out = pad2d(x, 1)
        assert out.shape == (1, 1, 3, 3)
        assert out[0, 0, 1, 1] == 5.0
        assert out.sum() == 5.0

    def test_border_zero_interior_preserved(self):
        rng = np.random.default_rng(2)
        x = as_tensor(rng.normal(size=(2, 3, 4, 5)))
        out = pad2d(x, 2)
        assert out.shape == (2, 3, 8, 9)
        assert np.array_equal(out[:, :, 2:-2, 2:-2], x)
        assert out[:, :, :2, :].sum() == 0.0
        assert out[:, :, :, -2:].sum() == 0.0

    def test_negative_pad_rejected(self):
        with pytest.raises(ShapeError):
            pad2d(tensor([1, 1, 2, 2]), -1)


class TestConvOutputSize:
    def test_same_padding_3x3(self):
        assert conv_output_size(224, 3, 1, 1) == 224

    def test_pool_halving(self):
        assert conv_output_size(224, 2, 2, 0) == 112

    def test_non_integral_rejected(self):
        with pytest.raises(ShapeError):
            conv_output_size(5, 2, 2, 0)

    def test_kernel_larger_than_input_rejected(self):
        with pytest.raises(ShapeError):
            conv_output_size(3, 5, 1, 0)


def naive_im2col(x, kernel, stride, pad):
    """Independent patch-matrix construction by explicit indexing."""
    n, c, h, w = x.shape
    h_out = (h + 2 * pad - kernel) // stride + 1
    w_out = (w + 2 * pad - kernel) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.zeros((c * kernel * kernel, n * h_out * w_out), dtype=x.dtype)
    col = 0
    for i in range(n):
        for oy in range(h_out):
            for ox in range(w_out):
                row = 0
                for ch in range(c):
                    for ky in range(kernel):
                        for kx in range(kernel):
                            cols[row, col] = xp[i, ch, oy * stride + ky, ox * stride + kx]
                            row += 1
                col += 1
    return cols


class TestIm2col:
    def test_1x1_kernel_is_reshape(self):
        rng = np.random.default_rng(3)
        x = as_tensor(rng.normal(size=(2, 3, 4, 4)))
        cols = im2col(x, 1, 1, 0)
        assert cols.shape == (3, 2 * 4 * 4)
        assert np.array_equal(cols, naive_im2col(x, 1, 1, 0))

    def test_full_image_patch_single_column(self):
        x = as_tensor(np.arange(9, dtype=np.float32).reshape(1, 1, 3, 3))
        cols = im2col(x, 3, 1, 0)
        assert cols.shape == (9, 1)
        assert cols[:, 0].tolist() == list(range(9))

    def test_matches_naive_construction(self):
        rng = np.random.default_rng(4)
        x = as_tensor(rng.normal(size=(1, 2, 4, 4)))
        assert np.array_equal(im2col(x, 3, 1, 1), naive_im2col(x, 3, 1, 1))

    @settings(deadline=None, max_examples=25)
    @given(
        n=st.integers(1, 2),
        c=st.integers(1, 3),
        size=st.integers(3, 7),
        kernel=st.sampled_from([1, 3]),
        stride=st.sampled_from([1, 2]),
        pad=st.sampled_from([0, 1]),
        seed=st.integers(0, 2**31),
    )
    def test_property_matches_naive(self, n, c, size, kernel, stride, pad, seed):
        if (size + 2 * pad - kernel) % stride != 0 or size + 2 * pad < kernel:
            return
        rng = np.random.default_rng(seed)
        x = as_tensor(rng.normal(size=(n, c, size, size)))
        assert np.array_equal(im2col(x, kernel, stride, pad), naive_im2col(x, kernel, stride, pad))

    def test_non_integral_output_rejected(self):
        with pytest.raises(ShapeError):
            im2col(tensor([1, 1, 5, 5]), 2, 2, 0)


class TestArgmax:
    def test_unique_max(self):
        assert argmax_axis(as_tensor([[0.1, 0.7, 0.2]])) == [1]

    def test_tie_takes_lowest_index(self):
        assert argmax_axis(as_tensor([[0.5, 0.5]])) == [0]
        assert argmax_axis(as_tensor([[1.0, 2.0, 2.0, 1.0]])) == [1]

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(5)
        x = as_tensor(rng.normal(size=(10, 5)))
        want = []
        for row in x:
            best, arg = -np.inf, 0
            for j, v in enumerate(row):
                if v > best:
                    best, arg = v, j
            want.append(arg)
        assert argmax_axis(x) == want

    def test_shift_invariance(self):
        rng = np.random.default_rng(6)
        x = as_tensor(rng.normal(size=(8, 4)))
        shifted = as_tensor(x + 3.25)
        assert argmax_axis(x) == argmax_axis(shifted)
