"""Dense numeric kernels every layer is built on.

Everything is float64 and row-major: a "Tensor2D" is a C-contiguous
``(rows, cols)`` ndarray, a "Tensor1D" a ``(n,)`` ndarray. The seeded
generator wraps PCG64 so the same seed yields the same stream on every
platform.
"""

from __future__ import annotations

import numpy as np

Tensor1D = np.ndarray
Tensor2D = np.ndarray


class ShapeError(ValueError):
    """Raised when operands disagree on dimensions; names both shapes."""


def as_tensor1d(values) -> Tensor1D:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"expected a 1-d tensor, got shape {arr.shape}")
    return arr


def as_tensor2d(values) -> Tensor2D:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-d tensor, got shape {arr.shape}")
    return arr


def assert_finite(arr: np.ndarray, what: str = "tensor") -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{what} contains non-finite entries")


def affine(W: Tensor2D, x: Tensor1D, b: Tensor1D) -> Tensor1D:
    """W^T x + b for W of shape (in, out), x of length in, b of length out."""
    if W.ndim != 2 or x.ndim != 1 or b.ndim != 1:
        raise ShapeError(
            f"affine expects (2d, 1d, 1d), got W{W.shape}, x{x.shape}, b{b.shape}"
        )
    if W.shape[0] != x.shape[0]:
        raise ShapeError(f"affine: W has {W.shape[0]} rows but x has length {x.shape[0]}")
    if W.shape[1] != b.shape[0]:
        raise ShapeError(f"affine: W has {W.shape[1]} cols but b has length {b.shape[0]}")
    return x @ W + b


def softmax(z: Tensor1D) -> Tensor1D:
    """Stable softmax (max-subtracted). Rejects empty input."""
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0:
        raise ValueError("softmax of an empty vector is undefined")
    shifted = z - np.max(z)
    e = np.exp(shifted)
    return e / np.sum(e)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    # Split by sign so exp never overflows.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def tanh_act(z):
    return np.tanh(np.asarray(z, dtype=np.float64))


def relu(z):
    return np.maximum(np.asarray(z, dtype=np.float64), 0.0)


class Rng:
    """Seeded, platform-independent random source (PCG64).

    A single Rng is meant to have one owner; derive independent
    deterministic substreams with :meth:`child` instead of sharing.
    """

    def __init__(self, seed: int, _spawn_key: tuple = ()):
        self.seed = int(seed)
        self._spawn_key = _spawn_key
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=_spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def child(self, key: int) -> "Rng":
        """Independent stream addressed by (seed, ...keys); order-insensitive."""
        return Rng(self.seed, self._spawn_key + (int(key),))

    def uniform(self, low: float, high: float, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None, scale: float = 1.0):
        return self._gen.normal(0.0, scale, size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def random(self, size=None):
        return self._gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, seq, size=None, replace=True):
        return self._gen.choice(seq, size=size, replace=replace)


def glorot_uniform(rng: Rng, fan_in: int, fan_out: int) -> Tensor2D:
    """Glorot/Xavier uniform init for a (fan_in, fan_out) weight matrix."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_in, fan_out))
