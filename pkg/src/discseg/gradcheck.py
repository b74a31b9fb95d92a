"""Central finite-difference verification of every analytic gradient.

Each component check builds a random small instance, reduces the layer
output against a random upstream tensor to a scalar, and compares the
analytic backward against (f(x+h) - f(x-h)) / 2h per component. Checks
run in float64 so they verify the formulas rather than float32 noise;
inputs are kept away from ReLU/maxpool kinks.
"""

from __future__ import annotations

import numpy as np

from . import layers
from .losses import PixelPartition, bce_grad, bce_loss, combined_grad, combined_loss, \
    jaccard_grad, jaccard_loss
from .tensor import rng_for

DEFAULT_TOLERANCE = 1e-3


def fd_gradient(f, x: np.ndarray, h: float) -> np.ndarray:
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(x)
        flat[i] = orig - h
        down = f(x)
        flat[i] = orig
        out[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-4) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _check_conv(rng: np.random.Generator, perturb: float, size: int = 4) -> float:
    x = rng.uniform(-1, 1, size=(2, size, size, 2))
    params = layers.ConvParams(rng.uniform(-1, 1, size=(3, 3, 2, 3)),
                               rng.uniform(-1, 1, size=3))
    out, cache = layers.conv2d_forward(x, params)
    upstream = rng.uniform(-1, 1, size=out.shape)
    gi, gk, gb = layers.conv2d_backward(cache, upstream)

    def objective_x(x2):
        return float(np.sum(layers.conv2d_forward(x2, params)[0] * upstream))

    def objective_k(k2):
        p2 = layers.ConvParams(k2, params.biases)
        return float(np.sum(layers.conv2d_forward(x, p2)[0] * upstream))

    def objective_b(b2):
        p2 = layers.ConvParams(params.kernels, b2)
        return float(np.sum(layers.conv2d_forward(x, p2)[0] * upstream))

    return max(
        relative_error(gi * perturb, fd_gradient(objective_x, x.copy(), 1e-3)),
        relative_error(gk * perturb, fd_gradient(objective_k, params.kernels.copy(), 1e-3)),
        relative_error(gb * perturb, fd_gradient(objective_b, params.biases.copy(), 1e-3)),
    )


def _check_pool(rng: np.random.Generator, perturb: float, size: int = 4) -> float:
    side = 2 * size
    while True:
        x = rng.uniform(0, 1, size=(1, side, side, 2))
        windows = (x.reshape(1, side // 2, 2, side // 2, 2, 2)
                   .transpose(0, 1, 3, 2, 4, 5).reshape(1, side // 2, side // 2, 4, 2))
        top2 = np.sort(windows, axis=3)[:, :, :, -2:, :]
        if np.min(top2[:, :, :, 1, :] - top2[:, :, :, 0, :]) > 5e-3:
            break
    out, cache = layers.maxpool2_forward(x)
    upstream = rng.uniform(-1, 1, size=out.shape)
    gi = layers.maxpool2_backward(cache, upstream)

    def objective(x2):
        return float(np.sum(layers.maxpool2_forward(x2)[0] * upstream))

    return relative_error(gi * perturb, fd_gradient(objective, x.copy(), 1e-3))


def _check_upsample(rng: np.random.Generator, perturb: float, size: int = 4) -> float:
    x = rng.uniform(-1, 1, size=(1, size, size, 2))
    upstream = rng.uniform(-1, 1, size=(1, 2 * size, 2 * size, 2))
    gi = layers.upsample2_backward(upstream)

    def objective(x2):
        return float(np.sum(layers.upsample2_forward(x2) * upstream))

    return relative_error(gi * perturb, fd_gradient(objective, x.copy(), 1e-3))


def _check_relu(rng: np.random.Generator, perturb: float, size: int = 4) -> float:
    x = rng.uniform(-1, 1, size=(3, 2 * size - 1))
    x = np.where(x >= 0, x + 0.01, x - 0.01)  # stay off the kink
    out, cache = layers.relu(x)
    upstream = rng.uniform(-1, 1, size=out.shape)
    gi = layers.relu_backward(cache, upstream)

    def objective(x2):
        return float(np.sum(layers.relu(x2)[0] * upstream))

    return relative_error(gi * perturb, fd_gradient(objective, x.copy(), 1e-3))


def _check_sigmoid(rng: np.random.Generator, perturb: float, size: int = 4) -> float:
    x = rng.uniform(-3, 3, size=(3, 2 * size - 1))
    out, cache = layers.sigmoid(x)
    upstream = rng.uniform(-1, 1, size=out.shape)
    gi = layers.sigmoid_backward(cache, upstream)

    def objective(x2):
        return float(np.sum(layers.sigmoid(x2)[0] * upstream))

    return relative_error(gi * perturb, fd_gradient(objective, x.copy(), 1e-3))


def _check_concat(rng: np.random.Generator, perturb: float, size: int = 4) -> float:
    a = rng.uniform(-1, 1, size=(2, size, size, 2))
    b = rng.uniform(-1, 1, size=(2, size, size, 3))
    upstream = rng.uniform(-1, 1, size=(2, size, size, 5))
    ga, gb = layers.split_channels(upstream, a.shape[3])

    def objective_a(a2):
        return float(np.sum(layers.concat_channels(a2, b) * upstream))

    def objective_b(b2):
        return float(np.sum(layers.concat_channels(a, b2) * upstream))

    return max(
        relative_error(ga * perturb, fd_gradient(objective_a, a.copy(), 1e-3)),
        relative_error(gb * perturb, fd_gradient(objective_b, b.copy(), 1e-3)),
    )


def _random_partition(rng: np.random.Generator, size: int = 4):
    n = int(rng.integers(2 * size, 12 * size))
    labels = (rng.random(n) < 0.3).astype(np.float64)
    if labels.sum() == 0:
        labels[int(rng.integers(0, n))] = 1.0
    if labels.sum() == n:
        labels[int(rng.integers(0, n))] = 0.0
    preds = rng.uniform(0.05, 0.95, size=n)
    return labels, preds


def _make_loss_check(loss_fn, grad_fn):
    def check(rng: np.random.Generator, perturb: float, size: int = 4) -> float:
        labels, preds = _random_partition(rng, size)
        analytic = grad_fn(PixelPartition(labels, preds)) * perturb

        def objective(p2):
            return loss_fn(PixelPartition(labels, p2))

        return relative_error(analytic, fd_gradient(objective, preds.copy(), 1e-4))

    return check


COMPONENTS = {
    "bce": _make_loss_check(bce_loss, bce_grad),
    "jaccard": _make_loss_check(jaccard_loss, jaccard_grad),
    "combined": _make_loss_check(combined_loss, combined_grad),
    "conv": _check_conv,
    "pool": _check_pool,
    "upsample": _check_upsample,
    "concat": _check_concat,
    "relu": _check_relu,
    "sigmoid": _check_sigmoid,
}


def run_suite(seed: int = 0, instances: int = 100, tolerance: float = DEFAULT_TOLERANCE,
              corrupt: str | None = None, size: int = 4) -> tuple[dict[str, float], bool]:
    """Worst relative error per component over `instances` random cases.

    corrupt names a component whose analytic gradient is deliberately
    scaled, to prove the comparison actually detects wrong gradients.
    """
    results = {}
    for comp_index, (name, check) in enumerate(COMPONENTS.items()):
        perturb = 1.02 if name == corrupt else 1.0
        worst = 0.0
        for i in range(instances):
            worst = max(worst, check(rng_for(seed, comp_index, i), perturb, size))
        results[name] = worst
    return results, all(err <= tolerance for err in results.values())
