"""Multi-scale feature extraction: two parallel single-channel branches.

Each branch produces a five-level pyramid. Levels 1-3 are the spatial
(texture/illumination) features, levels 4-5 the semantic ones. Spatial size
halves per level; channel width doubles per level from base_channels.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import DIVISOR, NUM_LEVELS, FusionConfig
from .errors import BadShape

LEAKY_SLOPE = 0.2


class ConvLeaky(nn.Module):
    def __init__(self, in_ch, out_ch, kernel_size=3, stride=1):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, kernel_size, stride=stride,
                              padding=kernel_size // 2)

    def forward(self, x):
        return F.leaky_relu(self.conv(x), negative_slope=LEAKY_SLOPE)


class DenseBlock(nn.Module):
    """Three concatenative 3x3 convs of growth C/2, then a 1x1 back to C."""

    def __init__(self, channels):
        super().__init__()
        growth = max(channels // 2, 1)
        self.conv1 = ConvLeaky(channels, growth)
        self.conv2 = ConvLeaky(channels + growth, growth)
        self.conv3 = ConvLeaky(channels + 2 * growth, growth)
        self.project = ConvLeaky(channels + 3 * growth, channels, kernel_size=1)

    def forward(self, x):
        x = torch.cat([x, self.conv1(x)], dim=1)
        x = torch.cat([x, self.conv2(x)], dim=1)
        x = torch.cat([x, self.conv3(x)], dim=1)
        return self.project(x)


@dataclass
class FeaturePyramid:
    """Five per-level feature maps; levels[i] is level i+1 of the contract."""

    levels: list[torch.Tensor]

    def __post_init__(self):
        if len(self.levels) != NUM_LEVELS:
            raise BadShape(f"expected {NUM_LEVELS} levels, got {len(self.levels)}")

    @property
    def spatial(self) -> list[torch.Tensor]:
        return self.levels[:3]

    @property
    def semantic(self) -> list[torch.Tensor]:
        return self.levels[3:]

    def level(self, i: int) -> torch.Tensor:
        return self.levels[i - 1]


class EncoderBranch(nn.Module):
    """One extraction branch: per-level entry conv + dense block, strided
    3x3 convs between levels."""

    def __init__(self, config: FusionConfig):
        super().__init__()
        widths = config.channel_widths
        self.entries = nn.ModuleList()
        self.dense_blocks = nn.ModuleList()
        self.downsamples = nn.ModuleList()
        in_ch = 1
        for i, width in enumerate(widths):
            self.entries.append(ConvLeaky(in_ch, width))
            self.dense_blocks.append(DenseBlock(width))
            if i + 1 < len(widths):
                self.downsamples.append(ConvLeaky(width, width, stride=2))
            in_ch = width

    def forward(self, image: torch.Tensor) -> FeaturePyramid:
        h, w = image.shape[2:]
        if h % DIVISOR or w % DIVISOR:
            raise BadShape(f"input {h}x{w} not divisible by {DIVISOR}")
        levels = []
        x = image
        for i, (entry, dense) in enumerate(zip(self.entries, self.dense_blocks)):
            x = dense(entry(x))
            levels.append(x)
            if i < len(self.downsamples):
                x = self.downsamples[i](x)
        return FeaturePyramid(levels)


class MultiScaleEncoder(nn.Module):
    """Visible and infrared branches with separate, non-shared parameters."""

    def __init__(self, config: FusionConfig):
        super().__init__()
        self.visible = EncoderBranch(config)
        self.infrared = EncoderBranch(config)

    def extract(self, image: torch.Tensor, branch: str) -> FeaturePyramid:
        if branch == "visible":
            return self.visible(image)
        if branch == "infrared":
            return self.infrared(image)
        raise ValueError(f"branch must be 'visible' or 'infrared', got '{branch}'")

    def forward(
        self, visible_y: torch.Tensor, infrared: torch.Tensor
    ) -> tuple[FeaturePyramid, FeaturePyramid]:
        return self.visible(visible_y), self.infrared(infrared)
