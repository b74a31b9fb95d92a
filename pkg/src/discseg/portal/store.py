"""Stroke-log persistence for the tracing portal.

Layout under the data directory:

    images/<id>.png                       source images
    annotations/<id>/<annotator>.jsonl    append-only stroke/submit events
    annotations/<id>/<annotator>_mask.png rendered mask, cached on submit
    assignments.json                      optional {username: [image ids]}

Events are one JSON object per line: {"type": "stroke", "mode", "width",
"points", "ts"} or {"type": "submit", "ts"}. Submitted logs are frozen;
the rendered mask is a pure replay of the draw/erase events.
"""

from __future__ import annotations

import io
import json
import math
import os
import threading
import time
from pathlib import Path

import numpy as np
from PIL import Image

from ..data import merge_annotations
from .render import Stroke, render_mask


class PortalError(Exception):
    """Base class; `status` is the HTTP status the API maps it to."""
    status = 400


class NotAssigned(PortalError):
    status = 403


class NotFound(PortalError):
    status = 404


class AlreadySubmitted(PortalError):
    status = 409


class BadStrokes(PortalError):
    status = 400


class EmptyTracing(PortalError):
    status = 400


class AnnotationStore:
    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.images_dir = self.data_dir / "images"
        self.annotations_dir = self.data_dir / "annotations"
        if not self.images_dir.is_dir():
            raise NotFound(f"no images directory under {self.data_dir}")
        self._dims_cache: dict[str, tuple[int, int]] = {}
        self._locks: dict[tuple[str, str], threading.Lock] = {}
        self._locks_guard = threading.Lock()
        assignments_path = self.data_dir / "assignments.json"
        self._assignments = (json.loads(assignments_path.read_text())
                             if assignments_path.exists() else None)

    # -- images and assignment ------------------------------------------------

    def image_ids(self) -> list[str]:
        return sorted(p.stem for p in self.images_dir.glob("*.png"))

    def image_path(self, image_id: str) -> Path:
        path = self.images_dir / f"{image_id}.png"
        if "/" in image_id or not path.exists():
            raise NotFound(f"unknown image '{image_id}'")
        return path

    def image_dims(self, image_id: str) -> tuple[int, int]:
        """(height, width) of the source image."""
        if image_id not in self._dims_cache:
            with Image.open(self.image_path(image_id)) as im:
                self._dims_cache[image_id] = (im.height, im.width)
        return self._dims_cache[image_id]

    def assigned_ids(self, username: str) -> list[str]:
        if self._assignments is None:
            return self.image_ids()  # every annotator traces the full pool
        return [i for i in self._assignments.get(username, []) if i in self.image_ids()]

    def check_assigned(self, image_id: str, username: str) -> None:
        self.image_path(image_id)
        if image_id not in self.assigned_ids(username):
            raise NotAssigned(f"image '{image_id}' is not assigned to '{username}'")

    # -- stroke event log -----------------------------------------------------

    def _log_path(self, image_id: str, username: str) -> Path:
        return self.annotations_dir / image_id / f"{username}.jsonl"

    def _mask_path(self, image_id: str, username: str) -> Path:
        return self.annotations_dir / image_id / f"{username}_mask.png"

    def _lock(self, image_id: str, username: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault((image_id, username), threading.Lock())

    def _read_events(self, image_id: str, username: str) -> list[dict]:
        path = self._log_path(image_id, username)
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line]

    def record(self, image_id: str, username: str) -> dict:
        """The full tracing record for one (image, annotator) stream."""
        events = self._read_events(image_id, username)
        strokes = [
            {"mode": e["mode"], "width": e["width"], "points": e["points"]}
            for e in events if e["type"] == "stroke"
        ]
        submitted = any(e["type"] == "submit" for e in events)
        return {
            "image_id": image_id,
            "annotator": username,
            "status": "submitted" if submitted else "in-progress",
            "strokes": strokes,
        }

    def is_submitted(self, image_id: str, username: str) -> bool:
        return any(e["type"] == "submit" for e in self._read_events(image_id, username))

    def _validate_strokes(self, strokes, dims) -> list[dict]:
        h, w = dims
        if not isinstance(strokes, list) or not strokes:
            raise BadStrokes("strokes must be a nonempty list")
        cleaned = []
        for s in strokes:
            if not isinstance(s, dict) or s.get("mode") not in ("draw", "erase"):
                raise BadStrokes("stroke mode must be 'draw' or 'erase'")
            width = s.get("width")
            if not isinstance(width, (int, float)) or not math.isfinite(width) or width <= 0:
                raise BadStrokes("stroke width must be a positive number")
            points = s.get("points")
            if not isinstance(points, list):
                raise BadStrokes("stroke points must be a list of [x, y]")
            for p in points:
                if (not isinstance(p, (list, tuple)) or len(p) != 2
                        or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in p)):
                    raise BadStrokes(f"malformed point {p!r}")
                x, y = p
                if not (0 <= x < w and 0 <= y < h):
                    raise BadStrokes(f"point ({x}, {y}) outside image bounds {w}x{h}")
            cleaned.append({"mode": s["mode"], "width": float(width),
                            "points": [[float(x), float(y)] for x, y in points]})
        return cleaned

    def append_strokes(self, image_id: str, username: str, strokes) -> None:
        """Atomically append a stroke batch, in order."""
        self.check_assigned(image_id, username)
        cleaned = self._validate_strokes(strokes, self.image_dims(image_id))
        with self._lock(image_id, username):
            if self.is_submitted(image_id, username):
                raise AlreadySubmitted(f"tracing for '{image_id}' is already submitted")
            path = self._log_path(image_id, username)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "a") as fh:
                for s in cleaned:
                    fh.write(json.dumps({"type": "stroke", "ts": time.time(), **s}) + "\n")
                fh.flush()

    def render(self, image_id: str, username: str) -> np.ndarray:
        events = self.record(image_id, username)["strokes"]
        strokes = [Stroke(e["mode"], e["width"], [tuple(p) for p in e["points"]])
                   for e in events]
        return render_mask(strokes, self.image_dims(image_id))

    def submit(self, image_id: str, username: str) -> None:
        """Freeze the record, render and persist the mask durably."""
        self.check_assigned(image_id, username)
        with self._lock(image_id, username):
            if self.is_submitted(image_id, username):
                raise AlreadySubmitted(f"tracing for '{image_id}' is already submitted")
            record = self.record(image_id, username)
            if not any(s["mode"] == "draw" for s in record["strokes"]):
                raise EmptyTracing("cannot submit a tracing with no draw strokes")
            mask = self.render(image_id, username)
            if not mask.any():
                raise EmptyTracing("tracing renders to an empty mask")

            mask_path = self._mask_path(image_id, username)
            with open(mask_path, "wb") as fh:
                Image.fromarray(mask * 255, mode="L").save(fh, format="PNG")
                fh.flush()
                os.fsync(fh.fileno())
            log_path = self._log_path(image_id, username)
            with open(log_path, "a") as fh:
                fh.write(json.dumps({"type": "submit", "ts": time.time()}) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    # -- exports ---------------------------------------------------------------

    def submitted_annotators(self, image_id: str) -> list[str]:
        folder = self.annotations_dir / image_id
        if not folder.is_dir():
            return []
        users = [p.stem for p in folder.glob("*.jsonl")]
        return sorted(u for u in users if self.is_submitted(image_id, u))

    def export_mask_png(self, image_id: str, username: str) -> bytes:
        self.image_path(image_id)
        if not self.is_submitted(image_id, username):
            raise NotFound(f"no submitted tracing of '{image_id}' by '{username}'")
        return self._mask_path(image_id, username).read_bytes()

    def export_merged_png(self, image_id: str) -> bytes:
        annotators = self.submitted_annotators(image_id)
        if not annotators:
            raise NotFound(f"no submitted tracings for '{image_id}'")
        masks = []
        for user in annotators:
            with Image.open(io.BytesIO(self.export_mask_png(image_id, user))) as im:
                masks.append((np.asarray(im) > 127).astype(np.float32)[:, :, None])
        merged = merge_annotations(masks)
        buf = io.BytesIO()
        Image.fromarray((merged[:, :, 0] * 255).astype(np.uint8), mode="L").save(buf, format="PNG")
        return buf.getvalue()
