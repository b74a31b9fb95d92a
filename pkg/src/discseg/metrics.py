"""Confusion-matrix evaluation: accuracy, Dice, sensitivity, IoU, timing.

The disc is the positive class. Aggregates are reported two ways (pixel
pooling across images, and the mean of per-image values) since published
dataset-level numbers rarely say which convention they use.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .tensor import ParameterError, ShapeError, Tensor

log = logging.getLogger(__name__)


def binarize(predictions: Tensor, threshold: float = 0.5) -> Tensor:
    """Probabilities >= threshold become 1, the rest 0."""
    return (predictions >= threshold).astype(np.float32)


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


def confusion(pred_mask: Tensor, true_mask: Tensor) -> ConfusionCounts:
    if pred_mask.shape != true_mask.shape:
        raise ShapeError(f"mask shapes differ: {pred_mask.shape} vs {true_mask.shape}")
    for m, which in ((pred_mask, "prediction"), (true_mask, "truth")):
        if not np.all((m == 0) | (m == 1)):
            raise ParameterError(f"{which} mask is not binary")
    p = pred_mask.reshape(-1).astype(bool)
    t = true_mask.reshape(-1).astype(bool)
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = p.size - tp - fp - fn
    return ConfusionCounts(tp, fp, tn, fn)


def compute_metrics(counts: ConfusionCounts) -> tuple[float, float, float, float]:
    """(accuracy, dice, sensitivity, iou) as fractions in [0, 1].

    Degenerate conventions: both masks empty -> DC = IoU = Sen = 1;
    exactly one empty -> DC = IoU = 0 and Sen follows the truth side.
    """
    if counts.total <= 0:
        raise ParameterError("confusion counts are empty")
    acc = (counts.tp + counts.tn) / counts.total
    overlap_denom = 2 * counts.tp + counts.fp + counts.fn
    if overlap_denom == 0:
        log.info("degenerate metrics: truth and prediction both empty")
        return acc, 1.0, 1.0, 1.0
    dc = 2 * counts.tp / overlap_denom
    iou = counts.tp / (counts.tp + counts.fp + counts.fn)
    if counts.tp + counts.fn == 0:
        log.info("degenerate metrics: empty truth mask")
        sen = 1.0
    else:
        sen = counts.tp / (counts.tp + counts.fn)
    return acc, dc, sen, iou


@dataclass
class ImageEval:
    source_id: str
    acc: float
    dc: float
    sen: float
    iou: float
    seconds: float


@dataclass
class EvalReport:
    images: list[ImageEval]
    pooled_counts: ConfusionCounts

    @property
    def pooled(self) -> tuple[float, float, float, float]:
        return compute_metrics(self.pooled_counts)

    @property
    def mean_of_images(self) -> tuple[float, float, float, float]:
        cols = np.array([[im.acc, im.dc, im.sen, im.iou] for im in self.images])
        return tuple(float(v) for v in cols.mean(axis=0))

    @property
    def mean_seconds(self) -> float:
        return float(np.mean([im.seconds for im in self.images]))

    def to_text(self) -> str:
        pooled = self.pooled
        means = self.mean_of_images
        lines = [f"images: {len(self.images)}"]
        for tag, vals in (("pooled", pooled), ("mean_of_images", means)):
            for name, v in zip(("acc", "dc", "sen", "iou"), vals):
                lines.append(f"{tag}_{name}_percent: {100 * v:.4f}")
        lines.append(f"mean_seconds_per_image: {self.mean_seconds:.4f}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["source_id,acc,dc,sen,iou,seconds"]
        for im in self.images:
            rows.append(f"{im.source_id},{im.acc:.6f},{im.dc:.6f},"
                        f"{im.sen:.6f},{im.iou:.6f},{im.seconds:.6f}")
        return "\n".join(rows) + "\n"


def timed_evaluate(model, samples, threshold: float = 0.5) -> EvalReport:
    """Per-image wall-clock forward + binarize, plus pooled confusion counts."""
    if not samples:
        raise ParameterError("cannot evaluate an empty dataset")
    images = []
    pooled = ConfusionCounts()
    for sample in samples:
        start = time.perf_counter()
        preds, _ = model.forward(sample.image[None, ...], train=False)
        pred_mask = binarize(preds[0], threshold)
        seconds = time.perf_counter() - start
        counts = confusion(pred_mask, sample.mask)
        pooled = pooled + counts
        acc, dc, sen, iou = compute_metrics(counts)
        images.append(ImageEval(sample.source_id, acc, dc, sen, iou, seconds))
    return EvalReport(images, pooled)
