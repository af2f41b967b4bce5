"""Pluggable detection-feature providers.

A provider turns the raw visible/infrared pair into feature maps matched to
pyramid levels 4 (H/8) and 5 (H/16). TinyBackbone is a small trainable
stand-in for an external detection backbone; NullProvider emits zeros for
the detector-free ablation. An external torch module can be dropped in via
the `detector = external:<path>` config key.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import DIVISOR, FusionConfig
from .errors import BadShape, ConfigError
from .encoder import ConvLeaky

STEM_WIDTH = 16
STAGE_WIDTHS = (32, 64, 96, 128)


@dataclass
class DetectionFeatures:
    """Maps aligned with pyramid levels 4 and 5."""

    level4: torch.Tensor  # (B, C4, H/8, W/8)
    level5: torch.Tensor  # (B, C5, H/16, W/16)


class TinyBackbone(nn.Module):
    """Five-stage strided CNN over the visible image with a projected
    infrared residual added at the stem."""

    def __init__(self, config: FusionConfig):
        super().__init__()
        self.stem = ConvLeaky(3, STEM_WIDTH)
        self.ir_proj = nn.Conv2d(1, STEM_WIDTH, 1)
        stages = []
        in_ch = STEM_WIDTH
        for width in STAGE_WIDTHS:
            stages.append(ConvLeaky(in_ch, width, stride=2))
            in_ch = width
        self.stages = nn.ModuleList(stages)
        self.head4 = nn.Conv2d(STAGE_WIDTHS[2], config.channels(4), 1)
        self.head5 = nn.Conv2d(STAGE_WIDTHS[3], config.channels(5), 1)

    def features(self, visible, infrared) -> DetectionFeatures:
        return self.forward(visible, infrared)

    def forward(self, visible, infrared) -> DetectionFeatures:
        _check_inputs(visible, infrared)
        x = self.stem(visible) + self.ir_proj(infrared)
        taps = {}
        for i, stage in enumerate(self.stages):
            x = stage(x)
            if i == 2:
                taps[4] = self.head4(x)
            elif i == 3:
                taps[5] = self.head5(x)
        return DetectionFeatures(level4=taps[4], level5=taps[5])


class NullProvider(nn.Module):
    """Zero detection features of the contracted shapes; no parameters."""

    def __init__(self, config: FusionConfig):
        super().__init__()
        self.c4 = config.channels(4)
        self.c5 = config.channels(5)

    def features(self, visible, infrared) -> DetectionFeatures:
        return self.forward(visible, infrared)

    def forward(self, visible, infrared) -> DetectionFeatures:
        _check_inputs(visible, infrared)
        b, _, h, w = visible.shape
        kwargs = {"dtype": visible.dtype, "device": visible.device}
        return DetectionFeatures(
            level4=torch.zeros(b, self.c4, h // 8, w // 8, **kwargs),
            level5=torch.zeros(b, self.c5, h // 16, w // 16, **kwargs),
        )


def _check_inputs(visible, infrared):
    if visible.ndim != 4 or visible.shape[1] != 3:
        raise BadShape(f"visible must be (B, 3, H, W), got {tuple(visible.shape)}")
    if infrared.ndim != 4 or infrared.shape[1] != 1:
        raise BadShape(f"infrared must be (B, 1, H, W), got {tuple(infrared.shape)}")
    h, w = visible.shape[2:]
    if h % DIVISOR or w % DIVISOR:
        raise BadShape(f"input {h}x{w} not divisible by {DIVISOR}")
    if infrared.shape[2:] != (h, w):
        raise BadShape("visible and infrared extents differ")


def freeze(provider: nn.Module) -> nn.Module:
    """Disable gradient flow into the provider; idempotent."""
    for p in provider.parameters():
        p.requires_grad_(False)
    return provider


def unfreeze(provider: nn.Module) -> nn.Module:
    """Re-enable gradient flow into the provider; idempotent."""
    for p in provider.parameters():
        p.requires_grad_(True)
    return provider


def build_provider(config: FusionConfig) -> nn.Module:
    """Instantiate the provider selected by the `detector` config key."""
    kind, _, arg = config.detector.partition(":")
    if kind == "tiny":
        return TinyBackbone(config)
    if kind == "null":
        return NullProvider(config)
    if kind == "external":
        if not arg:
            raise ConfigError("external detector needs a path: external:<path>")
        module = torch.load(arg, weights_only=False)
        if not hasattr(module, "features"):
            raise ConfigError(f"external detector at '{arg}' lacks a features() method")
        return module
    raise ConfigError(f"unknown detector '{config.detector}'")
