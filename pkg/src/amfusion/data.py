"""Core data types, configuration and image I/O.

Images are numpy float arrays in [0, 1], shaped H x W x 3 (visible) and
H x W x 1 (infrared). Heights and widths must be divisible by 16 so the
five-level encoder can downsample four times.
"""

import dataclasses
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import (
    ConfigError,
    CropTooLarge,
    DimensionMismatch,
    DimensionNotDivisible,
    HeadDivisibility,
)

DIVISOR = 16
NUM_LEVELS = 5
SPATIAL_LEVELS = (1, 2, 3)
SEMANTIC_LEVELS = (4, 5)

# ITU-R BT.601 luma coefficients, also used for chroma recomposition.
LUMA_R, LUMA_G, LUMA_B = 0.299, 0.587, 0.114


@dataclass
class FusionConfig:
    """All architecture and loss hyperparameters, plus ablation switches.

    Channel width at pyramid level i (1-based) is base_channels * 2**(i-1).
    """

    base_channels: int = 16
    sigma: float = 0.2
    eta: float = 0.75
    alpha: float = 1.5
    beta: float = 2.0
    exposure_level: float = 0.6
    exposure_patch: int = 16
    heads: int = 4
    use_idfm: bool = True
    use_dsfm: bool = True
    use_srm: bool = True
    use_detection_features: bool = True
    use_ill_loss: bool = True
    use_int_ill: bool = True
    use_exp: bool = True
    detector: str = "tiny"

    def __post_init__(self):
        if self.base_channels <= 0:
            raise ConfigError("base_channels must be positive")
        if self.sigma <= 0:
            raise ConfigError("sigma must be > 0")
        if self.alpha < 0 or self.beta < 0 or self.eta < 0:
            raise ConfigError("alpha, beta, eta must be >= 0")
        if not 0.0 < self.exposure_level < 1.0:
            raise ConfigError("exposure_level must lie in (0, 1)")
        if self.exposure_patch <= 0:
            raise ConfigError("exposure_patch must be positive")
        if self.heads <= 0:
            raise ConfigError("heads must be positive")
        for level in SEMANTIC_LEVELS:
            if self.channels(level) % self.heads != 0:
                raise HeadDivisibility(
                    f"channel count {self.channels(level)} at level {level} "
                    f"not divisible by heads={self.heads}"
                )
        kind = self.detector.split(":", 1)[0]
        if kind not in ("tiny", "null", "external"):
            raise ConfigError(f"unknown detector '{self.detector}'")

    def channels(self, level: int) -> int:
        """Channel width at pyramid level (1-based)."""
        if not 1 <= level <= NUM_LEVELS:
            raise ValueError(f"level must be in 1..{NUM_LEVELS}, got {level}")
        return self.base_channels * 2 ** (level - 1)

    @property
    def channel_widths(self) -> tuple[int, ...]:
        return tuple(self.channels(i) for i in range(1, NUM_LEVELS + 1))


def load_config(path) -> FusionConfig:
    """Parse a flat `key = value` text file into a FusionConfig.

    Blank lines and lines starting with '#' are ignored. Unknown keys are an
    error; values are coerced to the field's declared type.
    """
    fields = {f.name: f for f in dataclasses.fields(FusionConfig)}
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in fields:
                raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
            values[key] = _coerce(key, value, fields[key].type)
    return FusionConfig(**values)


def save_config(config: FusionConfig, path) -> None:
    """Write a FusionConfig as a flat `key = value` file."""
    with open(path, "w", encoding="utf-8") as fh:
        for f in dataclasses.fields(config):
            value = getattr(config, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            fh.write(f"{f.name} = {value}\n")


def _coerce(key, text, ftype):
    if ftype in (bool, "bool"):
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean '{text}' for key '{key}'")
    if ftype in (int, "int"):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"cannot parse int '{text}' for key '{key}'") from exc
    if ftype in (float, "float"):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"cannot parse float '{text}' for key '{key}'") from exc
    return text


@dataclass(frozen=True)
class ImagePair:
    """A registered visible/infrared pair with intensities in [0, 1]."""

    visible: np.ndarray
    infrared: np.ndarray
    id: str = ""

    def __post_init__(self):
        vis, ir = self.visible, self.infrared
        if vis.ndim != 3 or vis.shape[2] != 3:
            raise DimensionMismatch(f"visible must be HxWx3, got {vis.shape}")
        if ir.ndim != 3 or ir.shape[2] != 1:
            raise DimensionMismatch(f"infrared must be HxWx1, got {ir.shape}")
        if vis.shape[:2] != ir.shape[:2]:
            raise DimensionMismatch(
                f"visible {vis.shape[:2]} vs infrared {ir.shape[:2]}"
            )
        h, w = vis.shape[:2]
        if h % DIVISOR or w % DIVISOR:
            raise DimensionNotDivisible(f"{h}x{w} not divisible by {DIVISOR}")
        for name, img in (("visible", vis), ("infrared", ir)):
            if img.min() < 0.0 or img.max() > 1.0:
                raise ValueError(f"{name} intensities must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.visible.shape[0]

    @property
    def width(self) -> int:
        return self.visible.shape[1]


def load_png(path) -> np.ndarray:
    """Decode an 8-bit PNG to float32 HxWxC in [0, 1] (value / 255)."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB") if img.mode not in ("L", "RGB") else img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr.astype(np.float32) / 255.0


def save_png(image: np.ndarray, path) -> None:
    """Write a float image in [0, 1] as an 8-bit PNG (round to nearest)."""
    arr = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG")


def load_image_pair(visible_path, infrared_path, pair_id: str = "") -> ImagePair:
    """Load a registered pair from two PNG files.

    The infrared file may be stored as grayscale or RGB; RGB is collapsed to
    a single channel by luminance. Mismatched dimensions are an error, never
    silently resized.
    """
    visible = load_png(visible_path)
    infrared = load_png(infrared_path)
    if visible.shape[2] == 1:
        visible = np.repeat(visible, 3, axis=2)
    if infrared.shape[2] == 3:
        infrared = to_luminance(infrared)
    if visible.shape[:2] != infrared.shape[:2]:
        raise DimensionMismatch(
            f"visible {visible.shape[:2]} vs infrared {infrared.shape[:2]}"
        )
    h, w = visible.shape[:2]
    if h % DIVISOR or w % DIVISOR:
        raise DimensionNotDivisible(f"{h}x{w} not divisible by {DIVISOR}")
    if not pair_id:
        pair_id = os.path.splitext(os.path.basename(visible_path))[0]
    return ImagePair(visible=visible, infrared=infrared, id=pair_id)


def random_crop(pair: ImagePair, size: int, seed: int) -> ImagePair:
    """Crop the same seeded window out of both modalities.

    Pure function of (pair, size, seed); size must divide by 16 and fit
    inside the image.
    """
    h, w = pair.height, pair.width
    if size > min(h, w):
        raise CropTooLarge(f"crop {size} exceeds image {h}x{w}")
    if size % DIVISOR:
        raise DimensionNotDivisible(f"crop size {size} not divisible by {DIVISOR}")
    if size == h and size == w:
        return pair
    rng = np.random.default_rng(seed)
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return ImagePair(
        visible=pair.visible[top : top + size, left : left + size],
        infrared=pair.infrared[top : top + size, left : left + size],
        id=pair.id,
    )


def to_luminance(visible: np.ndarray) -> np.ndarray:
    """BT.601 luminance: Y = 0.299 R + 0.587 G + 0.114 B, kept as HxWx1."""
    y = LUMA_R * visible[:, :, 0] + LUMA_G * visible[:, :, 1] + LUMA_B * visible[:, :, 2]
    return y[:, :, None]


@dataclass
class LossReport:
    """Per-term loss values and the weighted total."""

    grad: float
    ssim: float
    int_ill: float
    exp: float
    total: float


@dataclass
class MetricReport:
    """Fusion-quality metrics for one fused image against its sources."""

    en: float
    mi: float
    sd: float
