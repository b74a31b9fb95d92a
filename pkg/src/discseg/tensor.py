"""Dense float32 tensor helpers shared by every other module.

A tensor is a C-contiguous ``numpy.ndarray`` of float32. Image-shaped
tensors use the [batch, height, width, channels] layout throughout the
package. Reductions accumulate in float64 so downstream gradient checks
stay stable.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Tensor = np.ndarray


class ShapeError(ValueError):
    """Tensor shapes are invalid or do not match."""


class ParameterError(ValueError):
    """A numeric argument is outside its valid range."""


def _check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(d) for d in shape)
    if len(shape) == 0:
        raise ShapeError("shape must have at least one dimension")
    if any(d < 1 for d in shape):
        raise ShapeError(f"dimensions must be >= 1, got {shape}")
    return shape


def as_tensor(values) -> Tensor:
    """Coerce nested lists or arrays to a contiguous float32 tensor."""
    return np.ascontiguousarray(values, dtype=np.float32)


def zeros(shape: Sequence[int]) -> Tensor:
    return np.zeros(_check_shape(shape), dtype=np.float32)


def ones(shape: Sequence[int]) -> Tensor:
    return np.ones(_check_shape(shape), dtype=np.float32)


def full(shape: Sequence[int], value: float) -> Tensor:
    return np.full(_check_shape(shape), value, dtype=np.float32)


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for (seed, stream...) so parallel order
    never changes what a consumer draws."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(stream))))


def gaussian_init(shape: Sequence[int], mean: float = 0.0, stddev: float = 0.05,
                  seed: int = 0) -> Tensor:
    """Deterministic Gaussian tensor; identical (shape, seed) gives identical bytes."""
    if stddev <= 0:
        raise ParameterError(f"stddev must be > 0, got {stddev}")
    shape = _check_shape(shape)
    gen = rng_for(seed)
    return gen.normal(mean, stddev, size=shape).astype(np.float32)


def _binary_op(a: Tensor, b: Tensor, op) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return op(a, b).astype(np.float32, copy=False)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary_op(a, b, np.add)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary_op(a, b, np.subtract)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary_op(a, b, np.multiply)


def scale(t: Tensor, factor: float) -> Tensor:
    return (t * np.float32(factor)).astype(np.float32, copy=False)


def tensor_sum(t: Tensor) -> float:
    # float64 accumulation; float32 partial sums drift on large tensors
    return float(np.sum(t, dtype=np.float64))


def tensor_mean(t: Tensor) -> float:
    return float(np.mean(t, dtype=np.float64))


def clip(t: Tensor, lo: float, hi: float) -> Tensor:
    return np.clip(t, np.float32(lo), np.float32(hi))


def tensor_map(t: Tensor, f: Callable[[float], float]) -> Tensor:
    out = np.empty_like(t, dtype=np.float32)
    flat_in = t.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        flat_out[i] = f(float(flat_in[i]))
    return out
