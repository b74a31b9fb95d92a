"""Turn an ordered stroke log into a binary mask.

Replay rule: draw strokes stamp brush-width capsules along their
polylines; erase strokes clear them. Whenever the chain of consecutive
draw strokes closes (its end comes within one brush width of its start),
the enclosed region is filled using the even-odd rule. Rendering is a
pure function of the stroke log, so replays are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Stroke:
    mode: str                      # draw | erase
    width: float                   # brush width, image pixels
    points: list[tuple[float, float]]  # (x, y) in image pixel coordinates


def _stamp_capsule(canvas: np.ndarray, p0, p1, radius: float, value: bool) -> None:
    """Mark every pixel center within `radius` of segment p0-p1."""
    h, w = canvas.shape
    x0 = max(0, int(math.floor(min(p0[0], p1[0]) - radius - 1)))
    x1 = min(w - 1, int(math.ceil(max(p0[0], p1[0]) + radius + 1)))
    y0 = max(0, int(math.floor(min(p0[1], p1[1]) - radius - 1)))
    y1 = min(h - 1, int(math.ceil(max(p0[1], p1[1]) + radius + 1)))
    if x0 > x1 or y0 > y1:
        return
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    ax, ay = p0
    dx, dy = p1[0] - ax, p1[1] - ay
    seg_sq = dx * dx + dy * dy
    if seg_sq == 0:
        dist_sq = (xs - ax) ** 2 + (ys - ay) ** 2
    else:
        t = np.clip(((xs - ax) * dx + (ys - ay) * dy) / seg_sq, 0.0, 1.0)
        dist_sq = (xs - (ax + t * dx)) ** 2 + (ys - (ay + t * dy)) ** 2
    canvas[y0:y1 + 1, x0:x1 + 1][dist_sq <= radius * radius] = value


def _stamp_polyline(canvas: np.ndarray, points, radius: float, value: bool) -> None:
    if len(points) == 1:
        _stamp_capsule(canvas, points[0], points[0], radius, value)
        return
    for a, b in zip(points[:-1], points[1:]):
        _stamp_capsule(canvas, a, b, radius, value)


def fill_polygon_evenodd(canvas: np.ndarray, points, value: bool = True) -> None:
    """Scanline even-odd fill of the polygon over pixel centers."""
    h, w = canvas.shape
    pts = np.asarray(points, dtype=np.float64)
    x1s, y1s = pts[:, 0], pts[:, 1]
    x2s, y2s = np.roll(x1s, -1), np.roll(y1s, -1)
    for row in range(h):
        spans = (y1s <= row) != (y2s <= row)  # edge crosses this scanline
        if not spans.any():
            continue
        xs = x1s[spans] + (row - y1s[spans]) * (x2s[spans] - x1s[spans]) / (y2s[spans] - y1s[spans])
        xs.sort()
        for left, right in zip(xs[0::2], xs[1::2]):
            start = max(0, int(math.ceil(left)))
            stop = min(w - 1, int(math.ceil(right)) - 1)
            if start <= stop:
                canvas[row, start:stop + 1] = value


def render_mask(strokes: list[Stroke], dims: tuple[int, int]) -> np.ndarray:
    """Replay strokes onto a blank canvas; returns a {0,1} uint8 [H,W] mask."""
    canvas = np.zeros(dims, dtype=bool)
    chain: list[tuple[float, float]] = []
    for stroke in strokes:
        points = [tuple(p) for p in stroke.points]
        if not points:
            continue  # zero-length strokes are ignored
        radius = stroke.width / 2.0
        if stroke.mode == "draw":
            _stamp_polyline(canvas, points, radius, True)
            chain.extend(points)
            if len(chain) >= 3:
                gap = math.dist(chain[0], chain[-1])
                if gap <= stroke.width:
                    fill_polygon_evenodd(canvas, chain, True)
                    chain = []
        else:
            _stamp_polyline(canvas, points, radius, False)
            chain = []
    return canvas.astype(np.uint8)
