"""Adaptive multi-scale fusion of infrared and visible images."""

from .data import FusionConfig, ImagePair, LossReport, MetricReport
from .errors import FusionError
from .network import AMFusionNet
from .trainer import Checkpoint, TrainSchedule, evaluate, fuse, train

__version__ = "0.1.0"

__all__ = [
    "AMFusionNet",
    "Checkpoint",
    "FusionConfig",
    "FusionError",
    "ImagePair",
    "LossReport",
    "MetricReport",
    "TrainSchedule",
    "evaluate",
    "fuse",
    "train",
    "__version__",
]
