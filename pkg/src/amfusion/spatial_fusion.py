"""Detail fusion for the high-resolution pyramid levels (1-3).

Each branch is first reinforced by channel attention; a joint spatial
attention over both reinforced maps then yields a single weight map w in
(0, 1) that convexly mixes the two residual streams:

    fused = w * (reinforced_vis + vis) + (1 - w) * (reinforced_ir + ir)

The weight map is free to specialize during training; the illumination
behaviour comes from the loss, not from a hard-coded illumination input.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import BadShape, ShapeMismatch

CAM_REDUCTION = 4
SAM_KERNEL = 7


class ChannelGate(nn.Module):
    """Channel attention: avg- and max-pooled features through a shared
    bottleneck, summed, sigmoid-gated."""

    def __init__(self, channels, reduction=CAM_REDUCTION):
        super().__init__()
        hidden = max(channels // reduction, 1)
        self.bottleneck = nn.Sequential(
            nn.Conv2d(channels, hidden, 1),
            nn.ReLU(),
            nn.Conv2d(hidden, channels, 1),
        )
        self.channels = channels

    def forward(self, feat):
        if feat.shape[1] != self.channels:
            raise BadShape(f"expected {self.channels} channels, got {feat.shape[1]}")
        avg = self.bottleneck(F.adaptive_avg_pool2d(feat, 1))
        mx = self.bottleneck(F.adaptive_max_pool2d(feat, 1))
        return torch.sigmoid(avg + mx)


def residual_convex_fusion(reinforced_a, a, reinforced_b, b, weight):
    """w * (reinforced_a + a) + (1 - w) * (reinforced_b + b), elementwise."""
    return weight * (reinforced_a + a) + (1.0 - weight) * (reinforced_b + b)


class DetailFusionBlock(nn.Module):
    """Channel attention per branch plus one shared spatial weight map."""

    def __init__(self, channels):
        super().__init__()
        self.gate_vis = ChannelGate(channels)
        self.gate_ir = ChannelGate(channels)
        self.spatial_conv = nn.Conv2d(4, 1, SAM_KERNEL, padding=SAM_KERNEL // 2)

    def channel_attend(self, feat, branch="visible"):
        gate = self.gate_vis if branch == "visible" else self.gate_ir
        return gate(feat) * feat

    def spatial_logits(self, reinforced_vis, reinforced_ir):
        stats = torch.cat(
            [
                reinforced_vis.mean(dim=1, keepdim=True),
                reinforced_vis.max(dim=1, keepdim=True).values,
                reinforced_ir.mean(dim=1, keepdim=True),
                reinforced_ir.max(dim=1, keepdim=True).values,
            ],
            dim=1,
        )
        return self.spatial_conv(stats)

    def forward(self, fvis, fir, weight=None):
        """Fuse two same-shape maps; returns (fused, weight map).

        `weight` overrides the learned spatial attention (test harness use).
        """
        if fvis.shape != fir.shape:
            raise ShapeMismatch(f"{tuple(fvis.shape)} vs {tuple(fir.shape)}")
        reinforced_vis = self.channel_attend(fvis, "visible")
        reinforced_ir = self.channel_attend(fir, "infrared")
        if weight is None:
            weight = torch.sigmoid(self.spatial_logits(reinforced_vis, reinforced_ir))
        fused = residual_convex_fusion(reinforced_vis, fvis, reinforced_ir, fir, weight)
        return fused, weight


class CbamFusionBlock(nn.Module):
    """Ablation stand-in: plain channel+spatial attention on the concatenated
    branches, then a 1x1 conv back to the branch width."""

    def __init__(self, channels):
        super().__init__()
        self.gate = ChannelGate(2 * channels)
        self.spatial_conv = nn.Conv2d(2, 1, SAM_KERNEL, padding=SAM_KERNEL // 2)
        self.merge = nn.Conv2d(2 * channels, channels, 1)

    def forward(self, fvis, fir):
        if fvis.shape != fir.shape:
            raise ShapeMismatch(f"{tuple(fvis.shape)} vs {tuple(fir.shape)}")
        x = torch.cat([fvis, fir], dim=1)
        x = self.gate(x) * x
        stats = torch.cat(
            [x.mean(dim=1, keepdim=True), x.max(dim=1, keepdim=True).values], dim=1
        )
        x = torch.sigmoid(self.spatial_conv(stats)) * x
        return self.merge(x)
