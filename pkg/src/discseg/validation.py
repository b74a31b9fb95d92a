"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np

from .tensor import ParameterError, ShapeError


def check_image_batch(X) -> np.ndarray:
    """Coerce to float32 [N,H,W,3] in [0,1]; single images gain a batch axis."""
    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 3:
        X = X[None, ...]
    if X.ndim != 4 or X.shape[3] != 3:
        raise ShapeError(f"expected images shaped [N,H,W,3], got {X.shape}")
    if X.shape[1] % 32 or X.shape[2] % 32:
        raise ShapeError(f"image spatial dims must be divisible by 32, got {X.shape[1:3]}")
    if X.size and (X.min() < 0 or X.max() > 1):
        raise ParameterError("image values must lie in [0, 1]")
    return X


def check_mask_batch(y, n: int, spatial: tuple[int, int]) -> np.ndarray:
    """Coerce to binary float32 [N,H,W,1] matching the image batch."""
    y = np.asarray(y, dtype=np.float32)
    if y.ndim == 2:
        y = y[None, ...]
    if y.ndim == 3:
        y = y[..., None]
    if y.ndim != 4 or y.shape[3] != 1:
        raise ShapeError(f"expected masks shaped [N,H,W] or [N,H,W,1], got {y.shape}")
    if y.shape[0] != n or y.shape[1:3] != spatial:
        raise ShapeError(f"masks {y.shape} do not match images [{n},{spatial[0]},{spatial[1]},3]")
    if not np.all((y == 0) | (y == 1)):
        raise ParameterError("masks must be strictly binary")
    return y
