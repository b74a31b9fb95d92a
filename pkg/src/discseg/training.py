"""Mini-batch training loop with best-checkpointing, learning-rate plateau
reduction, and early stopping.

Improvement means a strictly smaller validation loss. The plateau counter
resets both on improvement and after each halving; the early-stop counter
resets only on improvement, so the run halts exactly early_stop_patience
epochs after the best one.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import data
from .losses import LOSSES, PixelPartition
from .metrics import EvalReport, timed_evaluate
from .model import ModelGraph, build_model
from .optim import Nadam
from .tensor import ParameterError, rng_for

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Training aborted; the last checkpoint on disk is preserved."""


@dataclass
class TrainingConfig:
    batch_size: int = 4
    learning_rate: float = 1e-4
    plateau_patience: int = 25
    plateau_factor: float = 0.5
    early_stop_patience: int = 100
    max_epochs: int = 1000
    seed: int = 0
    loss: str = "combined"
    use_transfer_learning: bool = False
    use_augmentation: bool = False
    augmentation: data.AugmentationConfig = field(default_factory=data.AugmentationConfig)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ParameterError(f"batch size must be >= 1, got {self.batch_size}")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ParameterError("patience values must be positive")
        if self.loss not in LOSSES:
            raise ParameterError(f"unknown loss '{self.loss}'; pick one of {sorted(LOSSES)}")

    def config_hash(self) -> str:
        payload = asdict(self)
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    seconds: float


@dataclass
class TrainingHistory:
    rows: list[EpochRow] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,lr,seconds"]
        for r in self.rows:
            lines.append(f"{r.epoch},{r.train_loss:.8f},{r.val_loss:.8f},"
                         f"{r.lr:.10g},{r.seconds:.4f}")
        return "\n".join(lines) + "\n"


def _pooled_loss(model: ModelGraph, samples, loss_fn, batch_size: int) -> float:
    """Loss over one pool of every pixel in `samples` (no augmentation)."""
    preds, masks = [], []
    for images, mask in data.batch_iter(samples, batch_size):
        p, _ = model.forward(images, train=False)
        preds.append(p.reshape(-1))
        masks.append(mask.reshape(-1))
    part = PixelPartition(np.concatenate(masks), np.concatenate(preds))
    return loss_fn(part)


def write_checkpoint(model: ModelGraph, path: Path, epoch: int, val_loss: float,
                     config: TrainingConfig) -> None:
    model.save_weights(path)
    meta = {
        "epoch": epoch,
        "val_loss": f"{val_loss:.8f}",
        "config_hash": config.config_hash(),
        "width": model.width,
        "input_height": model.input_size[0],
        "input_width": model.input_size[1],
    }
    Path(f"{path}.meta").write_text(
        "".join(f"{k}: {v}\n" for k, v in meta.items()))


def read_checkpoint_meta(path) -> dict:
    meta = {}
    for line in Path(f"{path}.meta").read_text().splitlines():
        key, _, value = line.partition(":")
        meta[key.strip()] = value.strip()
    return meta


def train(model: ModelGraph, train_samples, val_samples, config: TrainingConfig,
          checkpoint_path=None, val_loss_hook=None):
    """Train in place and return (best model, history).

    val_loss_hook(epoch) -> float, when given, replaces the measured
    validation loss; it exists so callback timing can be tested against
    scripted sequences.
    """
    if not train_samples or not val_samples:
        raise ParameterError("train and validation sets must be nonempty")
    loss_fn, grad_fn = LOSSES[config.loss]
    optimizer = Nadam(lr=config.learning_rate)
    params = model.parameters()
    history = TrainingHistory()
    best_params = None
    plateau_counter = 0
    stop_counter = 0

    for epoch in range(1, config.max_epochs + 1):
        start = time.perf_counter()
        if config.use_augmentation:
            epoch_samples = [
                data.augment(s, config.augmentation, data.augment_rng(config.augmentation, i, epoch))
                for i, s in enumerate(train_samples)
            ]
        else:
            epoch_samples = train_samples

        shuffle_rng = rng_for(config.seed, epoch)
        total_loss = 0.0
        n_images = 0
        for images, masks in data.batch_iter(epoch_samples, config.batch_size, shuffle_rng):
            preds, caches = model.forward(images, train=True)
            part = PixelPartition(masks, preds)
            batch_loss = loss_fn(part)
            if not np.isfinite(batch_loss):
                raise TrainingError(f"non-finite training loss {batch_loss} at epoch {epoch}")
            grads = model.backward(caches, grad_fn(part))
            optimizer.step(params, grads)
            total_loss += batch_loss * images.shape[0]
            n_images += images.shape[0]
        train_loss = total_loss / n_images

        if val_loss_hook is not None:
            val_loss = float(val_loss_hook(epoch))
        else:
            val_loss = _pooled_loss(model, val_samples, loss_fn, config.batch_size)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss {val_loss} at epoch {epoch}")

        stop = False
        if val_loss < history.best_val_loss:
            history.best_val_loss = val_loss
            history.best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
            plateau_counter = 0
            stop_counter = 0
            if checkpoint_path is not None:
                write_checkpoint(model, Path(checkpoint_path), epoch, val_loss, config)
        else:
            plateau_counter += 1
            stop_counter += 1
            if plateau_counter == config.plateau_patience:
                optimizer.set_learning_rate(optimizer.lr * config.plateau_factor)
                log.info("epoch %d: plateau, learning rate -> %g", epoch, optimizer.lr)
                plateau_counter = 0
            if stop_counter == config.early_stop_patience:
                log.info("epoch %d: early stop (best epoch %d)", epoch, history.best_epoch)
                stop = True

        history.rows.append(EpochRow(epoch, train_loss, val_loss, optimizer.lr,
                                     time.perf_counter() - start))
        if stop:
            break

    if best_params is not None:
        for name, value in best_params.items():
            params[name][...] = value
    return model, history


def evaluate_checkpoint(path, samples) -> EvalReport:
    """Rebuild the model a checkpoint describes, load it, and evaluate."""
    meta = read_checkpoint_meta(path)
    model = build_model(
        input_size=(int(meta["input_height"]), int(meta["input_width"])),
        width_multiplier=float(meta["width"]),
    )
    model.load_weights(path, strict=True)
    return timed_evaluate(model, samples)
