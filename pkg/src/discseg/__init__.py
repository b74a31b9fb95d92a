"""discseg: optic disc segmentation from retinal images.

A from-scratch VGG16-UNET with hand-derived backpropagation, trained with
a combined binary cross-entropy + approximate Jaccard loss, evaluated with
standard overlap metrics, plus a multi-annotator disc-tracing portal whose
exports feed the data pipeline.
"""

__version__ = "0.1.0"

from .estimator import DiscSegmenter
from .model import ModelGraph, build_model
from .training import TrainingConfig, TrainingHistory, train

__all__ = [
    "DiscSegmenter",
    "ModelGraph",
    "build_model",
    "TrainingConfig",
    "TrainingHistory",
    "train",
    "__version__",
]
