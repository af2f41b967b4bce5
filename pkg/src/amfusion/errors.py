"""Exception types shared across the package."""


class FusionError(Exception):
    """Base class for all amfusion errors."""


class DimensionMismatch(FusionError):
    """Visible and infrared images do not share the same height/width."""


class DimensionNotDivisible(FusionError):
    """Image height or width is not divisible by the required factor (16)."""


class CropTooLarge(FusionError):
    """Requested crop size exceeds the image extent."""


class BadShape(FusionError):
    """A tensor does not match the shape contract of the operation."""


class ShapeMismatch(FusionError):
    """Two inputs that must agree in shape do not."""


class PatchMismatch(FusionError):
    """Image extent is not divisible by the exposure patch size."""


class TooSmall(FusionError):
    """Input is smaller than the minimum size the operation supports."""


class HeadDivisibility(FusionError):
    """Channel count is not divisible by the attention head count."""


class EmptyDataset(FusionError):
    """Dataset directory contains no usable image pairs."""


class NonFiniteLoss(FusionError):
    """A loss term became NaN/Inf during training; message names the term."""


class ConfigError(FusionError):
    """Configuration value violates an invariant or cannot be parsed."""


class CheckpointError(FusionError):
    """Checkpoint file is missing, corrupt, or has an unsupported version."""
