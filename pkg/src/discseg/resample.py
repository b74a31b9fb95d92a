"""Affine resampling on [H,W,C] arrays: the geometry behind resizing and
augmentation. Inverse mapping with bilinear or nearest interpolation and
zero fill outside the source bounds."""

from __future__ import annotations

import numpy as np


def affine_sample(img: np.ndarray, matrix: np.ndarray, out_shape: tuple[int, int],
                  order: str = "bilinear") -> np.ndarray:
    """Sample img at src = matrix @ (x, y, 1) for every output pixel.

    matrix is the 2x3 inverse map from output pixel coordinates to source
    coordinates (x = column, y = row). Out-of-bounds source points read 0.
    """
    h_out, w_out = out_shape
    h, w = img.shape[:2]
    xs, ys = np.meshgrid(np.arange(w_out, dtype=np.float64),
                         np.arange(h_out, dtype=np.float64))
    sx = matrix[0, 0] * xs + matrix[0, 1] * ys + matrix[0, 2]
    sy = matrix[1, 0] * xs + matrix[1, 1] * ys + matrix[1, 2]

    if order == "nearest":
        xi = np.rint(sx).astype(np.int64)
        yi = np.rint(sy).astype(np.int64)
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        out = np.zeros((h_out, w_out) + img.shape[2:], dtype=img.dtype)
        out[inside] = img[yi[inside], xi[inside]]
        return out
    if order != "bilinear":
        raise ValueError(f"unknown interpolation order '{order}'")

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = (sx - x0).astype(np.float32)
    fy = (sy - y0).astype(np.float32)
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]

    acc = np.zeros((h_out, w_out) + img.shape[2:], dtype=np.float32)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xc = x0 + dx
            yc = y0 + dy
            inside = (xc >= 0) & (xc < w) & (yc >= 0) & (yc < h)
            vals = img[yc.clip(0, h - 1), xc.clip(0, w - 1)]
            weight = wy * wx
            if img.ndim == 3:
                vals = np.where(inside[..., None], vals, 0)
            else:
                vals = np.where(inside, vals, 0)
            acc += (weight * vals).astype(np.float32)
    return acc.astype(img.dtype)


def resize(img: np.ndarray, out_shape: tuple[int, int], order: str = "bilinear") -> np.ndarray:
    """Resize to (h, w). Identity shapes return the input unchanged."""
    h_out, w_out = out_shape
    h, w = img.shape[:2]
    if (h, w) == (h_out, w_out):
        return img.copy()
    # align corners: source and output corner pixel centers coincide
    ax = (w - 1) / (w_out - 1) if w_out > 1 else 0.0
    ay = (h - 1) / (h_out - 1) if h_out > 1 else 0.0
    matrix = np.array([[ax, 0.0, 0.0], [0.0, ay, 0.0]])
    return affine_sample(img, matrix, (h_out, w_out), order)


def compose(*mats: np.ndarray) -> np.ndarray:
    """Compose 2x3 affines: compose(A, B) maps p -> A(B(p))."""
    out = np.eye(3)
    for m in mats:
        m3 = np.vstack([m, [0.0, 0.0, 1.0]])
        out = out @ m3
    return out[:2]


def identity() -> np.ndarray:
    return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def translation(dx: float, dy: float) -> np.ndarray:
    return np.array([[1.0, 0.0, dx], [0.0, 1.0, dy]])


def rotation_about(cx: float, cy: float, degrees: float) -> np.ndarray:
    """Source-coordinate map that rotates content by `degrees` counterclockwise."""
    rad = np.deg2rad(degrees)
    c, s = np.cos(rad), np.sin(rad)
    # inverse rotation applied around the pivot
    rot = np.array([[c, s, 0.0], [-s, c, 0.0]])
    return compose(translation(cx, cy), rot, translation(-cx, -cy))


def flip_h(width: int) -> np.ndarray:
    return np.array([[-1.0, 0.0, width - 1.0], [0.0, 1.0, 0.0]])


def flip_v(height: int) -> np.ndarray:
    return np.array([[1.0, 0.0, 0.0], [0.0, -1.0, height - 1.0]])
