"""Bottom-up reconstruction of the fused image.

The five fused pyramid levels are merged into two full-resolution streams:
levels 3..1 form the spatial stream, levels 5..4 the semantic stream (then
upsampled the rest of the way). The semantic stream is converted into a
multiplicative weight and additive bias that rectify the spatial stream
before a final 1x1 convolution and sigmoid produce the fused luminance.
"""

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import LUMA_B, LUMA_G, LUMA_R, FusionConfig
from .encoder import ConvLeaky
from .errors import BadShape, ShapeMismatch


class UpMergeBlock(nn.Module):
    """Conv, 2x nearest upsample, concat with the skip level, conv."""

    def __init__(self, hi_channels, lo_channels):
        super().__init__()
        self.pre = ConvLeaky(hi_channels, lo_channels)
        self.post = ConvLeaky(2 * lo_channels, lo_channels)

    def forward(self, deep, skip):
        x = F.interpolate(self.pre(deep), scale_factor=2, mode="nearest")
        if x.shape[2:] != skip.shape[2:]:
            raise ShapeMismatch(f"upsampled {tuple(x.shape)} vs skip {tuple(skip.shape)}")
        return self.post(torch.cat([x, skip], dim=1))


class PyramidMerge(nn.Module):
    """Merges fused levels into full-resolution spatial/semantic streams."""

    def __init__(self, config: FusionConfig):
        super().__init__()
        c1, c2, c3, c4, c5 = config.channel_widths
        self.spatial_32 = UpMergeBlock(c3, c2)
        self.spatial_21 = UpMergeBlock(c2, c1)
        self.semantic_54 = UpMergeBlock(c5, c4)
        # No shallower levels exist for the semantic stream; plain conv+up
        # stages carry it from H/8 to full resolution at width c1.
        self.semantic_up = nn.ModuleList(
            [ConvLeaky(c4, c3), ConvLeaky(c3, c2), ConvLeaky(c2, c1)]
        )

    def forward(self, fused_levels):
        if len(fused_levels) != 5:
            raise BadShape(f"expected 5 fused levels, got {len(fused_levels)}")
        l1, l2, l3, l4, l5 = fused_levels
        spatial = self.spatial_21(self.spatial_32(l3, l2), l1)
        semantic = self.semantic_54(l5, l4)
        for stage in self.semantic_up:
            semantic = F.interpolate(stage(semantic), scale_factor=2, mode="nearest")
        return spatial, semantic

    merge_pyramid = forward


class SemanticRectifier(nn.Module):
    """Two conv/ReLU heads emitting the semantic weight and bias maps."""

    def __init__(self, channels):
        super().__init__()
        self.weight_head = self._head(channels)
        self.bias_head = self._head(channels)

    @staticmethod
    def _head(channels):
        return nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.ReLU(),
        )

    def forward(self, semantic):
        return self.weight_head(semantic), self.bias_head(semantic)


class Reconstructor(nn.Module):
    """Pyramid merge + semantic rectification + final rendering."""

    def __init__(self, config: FusionConfig):
        super().__init__()
        self.merge = PyramidMerge(config)
        self.rectifier = SemanticRectifier(config.channels(1))
        self.render_conv = nn.Conv2d(config.channels(1), 1, 1)
        self.use_srm = config.use_srm

    def merge_pyramid(self, fused_levels):
        return self.merge(fused_levels)

    def rectify_and_render(self, spatial, semantic, weight=None, bias=None):
        """Fused luminance in (0, 1) from the two full-resolution streams.

        `weight`/`bias` override the learned rectification (test harness use).
        """
        if spatial.shape != semantic.shape:
            raise ShapeMismatch(f"{tuple(spatial.shape)} vs {tuple(semantic.shape)}")
        if weight is None and bias is None:
            weight, bias = self.rectifier(semantic)
        return torch.sigmoid(self.render_conv(weight * spatial + bias))

    def forward(self, fused_levels):
        spatial, semantic = self.merge(fused_levels)
        if self.use_srm:
            return self.rectify_and_render(spatial, semantic)
        # Ablation: semantic stream added directly to the spatial one.
        return torch.sigmoid(self.render_conv(spatial + semantic))


# BT.601 analysis/synthesis pair; chroma scaled so Cb, Cr lie in [-0.5, 0.5].
_CB_SCALE = 0.5 / (1.0 - LUMA_B)
_CR_SCALE = 0.5 / (1.0 - LUMA_R)


def recompose_color(fused_y: np.ndarray, visible: np.ndarray) -> np.ndarray:
    """Replace the visible image's luminance with the fused one.

    Chroma is taken from the visible image in YCbCr, the fused luminance is
    substituted, and the result converted back to RGB, clamped to [0, 1].
    """
    if fused_y.ndim == 2:
        fused_y = fused_y[:, :, None]
    if fused_y.shape[:2] != visible.shape[:2] or visible.shape[2] != 3:
        raise ShapeMismatch(
            f"fused {fused_y.shape} incompatible with visible {visible.shape}"
        )
    r, g, b = visible[:, :, 0], visible[:, :, 1], visible[:, :, 2]
    y = LUMA_R * r + LUMA_G * g + LUMA_B * b
    cb = _CB_SCALE * (b - y)
    cr = _CR_SCALE * (r - y)

    y_new = fused_y[:, :, 0]
    r_new = y_new + cr / _CR_SCALE
    b_new = y_new + cb / _CB_SCALE
    g_new = (y_new - LUMA_R * r_new - LUMA_B * b_new) / LUMA_G
    rgb = np.stack([r_new, g_new, b_new], axis=-1)
    return np.clip(rgb, 0.0, 1.0).astype(visible.dtype)
