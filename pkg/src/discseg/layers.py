"""Forward and backward passes for every layer kind the network uses.

All image tensors are [batch, height, width, channels]. Each forward
returns (output, cache); the matching backward consumes the cache from
the same forward call. Layers preserve the input dtype so numerical
gradient checks can run the identical code path in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tensor, gaussian_init


@dataclass
class ConvParams:
    """Kernels [kh, kw, c_in, c_out] and biases [c_out] of one convolution."""

    kernels: Tensor
    biases: Tensor

    @property
    def c_in(self) -> int:
        return self.kernels.shape[2]

    @property
    def c_out(self) -> int:
        return self.kernels.shape[3]

    def count(self) -> int:
        return int(self.kernels.size + self.biases.size)


def init_conv(kh: int, kw: int, c_in: int, c_out: int, seed: int,
              stddev: float = 0.05) -> ConvParams:
    kernels = gaussian_init((kh, kw, c_in, c_out), 0.0, stddev, seed)
    biases = np.zeros(c_out, dtype=np.float32)
    return ConvParams(kernels, biases)


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Gather same-padded kh x kw patches: [B,H,W,C] -> [B*H*W, kh*kw*C]."""
    b, h, w, c = x.shape
    ph, pw = kh // 2, kw // 2
    if ph or pw:
        x = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    sb, sh, sw, sc = x.strides
    patches = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, h, w, kh, kw, c),
        strides=(sb, sh, sw, sh, sw, sc),
        writeable=False,
    )
    return np.ascontiguousarray(patches).reshape(b * h * w, kh * kw * c)


def conv2d_forward(x: Tensor, params: ConvParams):
    """Same-padding stride-1 convolution; output spatial dims equal input."""
    if x.ndim != 4:
        raise ShapeError(f"expected [B,H,W,C] input, got shape {x.shape}")
    kh, kw, c_in, c_out = params.kernels.shape
    if x.shape[3] != c_in:
        raise ShapeError(f"input has {x.shape[3]} channels, kernels expect {c_in}")
    b, h, w, _ = x.shape
    cols = _im2col(x, kh, kw)
    w_mat = params.kernels.reshape(kh * kw * c_in, c_out).astype(x.dtype, copy=False)
    out = cols @ w_mat
    out += params.biases.astype(x.dtype, copy=False)
    cache = (cols, x.shape, params)
    return out.reshape(b, h, w, c_out), cache


def conv2d_backward(cache, upstream: Tensor):
    """Gradients of the convolution w.r.t. input, kernels, and biases."""
    cols, x_shape, params = cache
    b, h, w, c_in = x_shape
    kh, kw, _, c_out = params.kernels.shape
    if upstream.shape != (b, h, w, c_out):
        raise ShapeError(f"upstream shape {upstream.shape} != forward output {(b, h, w, c_out)}")
    up_flat = upstream.reshape(b * h * w, c_out)

    grad_biases = up_flat.sum(axis=0)
    grad_kernels = (cols.T @ up_flat).reshape(params.kernels.shape)

    w_mat = params.kernels.reshape(kh * kw * c_in, c_out).astype(upstream.dtype, copy=False)
    grad_cols = (up_flat @ w_mat.T).reshape(b, h, w, kh, kw, c_in)

    ph, pw = kh // 2, kw // 2
    grad_pad = np.zeros((b, h + 2 * ph, w + 2 * pw, c_in), dtype=upstream.dtype)
    for dy in range(kh):
        for dx in range(kw):
            grad_pad[:, dy:dy + h, dx:dx + w, :] += grad_cols[:, :, :, dy, dx, :]
    grad_input = grad_pad[:, ph:ph + h, pw:pw + w, :]
    return grad_input, grad_kernels, grad_biases


def maxpool2_forward(x: Tensor):
    """2x2 stride-2 max pooling; ties go to the first element in scan order."""
    b, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    windows = x.reshape(b, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 2, 4, 5)
    flat = windows.reshape(b, h // 2, w // 2, 4, c)
    idx = np.argmax(flat, axis=3)
    out = np.take_along_axis(flat, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    cache = (idx, x.shape)
    return out, cache


def maxpool2_backward(cache, upstream: Tensor) -> Tensor:
    idx, x_shape = cache
    b, h, w, c = x_shape
    if upstream.shape != (b, h // 2, w // 2, c):
        raise ShapeError(f"upstream shape {upstream.shape} != pooled shape {(b, h // 2, w // 2, c)}")
    flat = np.zeros((b, h // 2, w // 2, 4, c), dtype=upstream.dtype)
    np.put_along_axis(flat, idx[:, :, :, None, :], upstream[:, :, :, None, :], axis=3)
    return flat.reshape(b, h // 2, w // 2, 2, 2, c).transpose(0, 1, 3, 2, 4, 5).reshape(b, h, w, c)


def upsample2_forward(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x replication."""
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def upsample2_backward(upstream: Tensor) -> Tensor:
    """Adjoint of replication: sum each 2x2 block."""
    b, h, w, c = upstream.shape
    return upstream.reshape(b, h // 2, 2, w // 2, 2, c).sum(axis=(2, 4))


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[:3] != b.shape[:3]:
        raise ShapeError(f"concat needs matching batch/spatial dims: {a.shape} vs {b.shape}")
    return np.concatenate([a, b], axis=3)


def split_channels(upstream: Tensor, c_a: int):
    """Backward of concat_channels: route upstream slices to each source."""
    return upstream[..., :c_a], upstream[..., c_a:]


def relu(x: Tensor):
    out = np.maximum(x, 0)
    return out, x


def relu_backward(cache, upstream: Tensor) -> Tensor:
    # derivative at exactly 0 is defined as 0
    return upstream * (cache > 0)


def sigmoid(x: Tensor):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    # keep outputs strictly inside (0,1) even where float32 saturates
    eps = np.finfo(x.dtype).eps
    np.clip(out, eps, 1.0 - eps, out=out)
    return out, out


def sigmoid_backward(cache, upstream: Tensor) -> Tensor:
    s = cache
    return upstream * s * (1.0 - s)
