"""Shared fixtures and numeric oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from disasterlens.arch import parse_arch, synthetic_arch_text
from disasterlens.synthetic import generate_dataset

TINY_ARCH = """
input 3 8 8
conv 4 3 1 1 relu
maxpool 2 2
conv 6 3 1 1 relu
maxpool 2 2
flatten
dense 5
"""


@pytest.fixture(scope="session")
def tiny_spec():
    """A 2-conv-block 8x8 network: fast enough for per-test forward passes."""
    return parse_arch(TINY_ARCH)


@pytest.fixture(scope="session")
def small_spec():
    """The bundled 3-conv-block 64x64 network used by the texture experiments."""
    return parse_arch(synthetic_arch_text())


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Session-wide synthetic dataset: 500 balanced 64x64 images plus manifest."""
    root = tmp_path_factory.mktemp("corpus")
    manifest = generate_dataset(root, count=500, side=64, seed=0)
    return manifest, root


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """A 100-image dataset for tests that train but do not need headroom."""
    root = tmp_path_factory.mktemp("mini_corpus")
    manifest = generate_dataset(root, count=100, side=64, seed=1)
    return manifest, root


def numeric_gradient(f, x: np.ndarray, step: float = 1e-3) -> np.ndarray:
    """Central finite differences of scalar f at x, elementwise, in float64."""
    x = x.astype(np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + step
        hi = f(x)
        x[i] = orig - step
        lo = f(x)
        x[i] = orig
        grad[i] = (hi - lo) / (2.0 * step)
        it.iternext()
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-wise relative disagreement: ||a-b|| / max(||a||, ||b||, eps)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-30)
    return float(np.linalg.norm(a - b) / denom)


def softmax_xent_oracle(logits: np.ndarray, labels) -> float:
    """Float64 reference of mean cross-entropy over softmax rows."""
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=1, keepdims=True)
    picked = probs[np.arange(len(labels)), np.asarray(labels)]
    return float(np.mean(-np.log(np.clip(picked, 1e-12, None))))


def dense_xent_oracle(x: np.ndarray, w: np.ndarray, b: np.ndarray, labels) -> float:
    """Float64 reference loss of the full head: xent(softmax(xW + b))."""
    logits = x.astype(np.float64) @ w.astype(np.float64) + b.astype(np.float64)
    return softmax_xent_oracle(logits, labels)
