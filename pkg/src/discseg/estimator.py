"""Scikit-learn style estimator wrapping the segmentation pipeline.

DiscSegmenter follows the fit/predict convention (plus get_params and
set_params) so it drops into pipelines and grid searches without a hard
scikit-learn dependency: __init__ only stores hyperparameters, fit builds
and trains the network, learned state lives in trailing-underscore
attributes.
"""

from __future__ import annotations

import inspect

import numpy as np

from . import data
from .metrics import binarize, compute_metrics, confusion
from .model import build_model
from .tensor import ParameterError
from .training import TrainingConfig, train
from .validation import check_image_batch, check_mask_batch


class DiscSegmenter:
    """Per-pixel disc probability model with a thresholded predict."""

    def __init__(self, width=1.0, loss="combined", learning_rate=1e-4, batch_size=4,
                 max_epochs=100, plateau_patience=25, early_stop_patience=100,
                 augment=False, validation_fraction=0.1, threshold=0.5, seed=0,
                 pretrained_encoder=None):
        self.width = width
        self.loss = loss
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.plateau_patience = plateau_patience
        self.early_stop_patience = early_stop_patience
        self.augment = augment
        self.validation_fraction = validation_fraction
        self.threshold = threshold
        self.seed = seed
        self.pretrained_encoder = pretrained_encoder

    # -- sklearn plumbing ---------------------------------------------------

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ParameterError(f"invalid parameter '{key}' for DiscSegmenter")
            setattr(self, key, value)
        return self

    # -- estimator API ------------------------------------------------------

    def fit(self, X, y):
        X = check_image_batch(X)
        y = check_mask_batch(y, X.shape[0], X.shape[1:3])
        samples = [data.Sample(X[i], y[i], source_id=str(i)) for i in range(X.shape[0])]
        train_samples, val_samples = data.carve_validation(
            samples, self.validation_fraction, self.seed)

        self.model_ = build_model(input_size=X.shape[1:3], width_multiplier=self.width,
                                  seed=self.seed)
        if self.pretrained_encoder is not None:
            self.model_.load_weights(self.pretrained_encoder, strict=False)
        config = TrainingConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            plateau_patience=self.plateau_patience,
            early_stop_patience=self.early_stop_patience,
            max_epochs=self.max_epochs,
            seed=self.seed,
            loss=self.loss,
            use_transfer_learning=self.pretrained_encoder is not None,
            use_augmentation=self.augment,
            augmentation=data.AugmentationConfig(seed=self.seed),
        )
        self.model_, self.history_ = train(self.model_, train_samples, val_samples, config)
        return self

    def predict_proba(self, X):
        """Per-pixel disc probabilities, [N,H,W]."""
        self._check_fitted()
        X = check_image_batch(X)
        out = []
        for start in range(0, X.shape[0], self.batch_size):
            preds, _ = self.model_.forward(X[start:start + self.batch_size], train=False)
            out.append(preds[..., 0])
        return np.concatenate(out)

    def predict(self, X):
        """Binary disc masks, [N,H,W]."""
        return binarize(self.predict_proba(X), self.threshold)

    def score(self, X, y):
        """Mean per-image Dice coefficient."""
        X = check_image_batch(X)
        y = check_mask_batch(y, X.shape[0], X.shape[1:3])
        preds = self.predict(X)
        dices = []
        for i in range(X.shape[0]):
            _, dc, _, _ = compute_metrics(confusion(preds[i][..., None], y[i]))
            dices.append(dc)
        return float(np.mean(dices))

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ParameterError("this DiscSegmenter instance is not fitted yet")
