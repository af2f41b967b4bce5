"""Full fusion network: encoder, per-level fusion blocks, reconstruction.

The visible image contributes its luminance to the encoder; its full RGB
goes to the detection-feature provider. Levels 1-3 are fused by detail
blocks, levels 4-5 by detection-guided semantic blocks, and the merged
pyramid is rendered into a single fused luminance channel.
"""

import numpy as np
import torch
import torch.nn as nn

from .data import LUMA_B, LUMA_G, LUMA_R, FusionConfig
from .detection import NullProvider, build_provider
from .encoder import MultiScaleEncoder
from .errors import BadShape
from .reconstruction import Reconstructor, recompose_color
from .semantic_fusion import SelfAttentionFusionBlock, SemanticFusionBlock
from .spatial_fusion import CbamFusionBlock, DetailFusionBlock


def luminance(visible_rgb: torch.Tensor) -> torch.Tensor:
    """(B, 3, H, W) -> (B, 1, H, W) luminance, same weights as the datamodel."""
    if visible_rgb.ndim != 4 or visible_rgb.shape[1] != 3:
        raise BadShape(f"expected (B, 3, H, W), got {tuple(visible_rgb.shape)}")
    w = visible_rgb.new_tensor([LUMA_R, LUMA_G, LUMA_B]).view(1, 3, 1, 1)
    return (visible_rgb * w).sum(dim=1, keepdim=True)


class AMFusionNet(nn.Module):
    """Adaptive multi-scale fusion of an infrared/visible pair."""

    def __init__(self, config: FusionConfig | None = None):
        super().__init__()
        self.config = config if config is not None else FusionConfig()
        config = self.config
        self.encoder = MultiScaleEncoder(config)
        detail_cls = DetailFusionBlock if config.use_idfm else CbamFusionBlock
        self.detail_blocks = nn.ModuleList(
            detail_cls(config.channels(i)) for i in (1, 2, 3)
        )
        if config.use_dsfm:
            semantic = [
                SemanticFusionBlock(config.channels(i), config.heads) for i in (4, 5)
            ]
        else:
            semantic = [
                SelfAttentionFusionBlock(config.channels(i), config.heads)
                for i in (4, 5)
            ]
        self.semantic_blocks = nn.ModuleList(semantic)
        self.detector = build_provider(config)
        self.reconstructor = Reconstructor(config)

    @property
    def uses_detection(self) -> bool:
        """Whether semantic fusion is guided by real detection features."""
        return self.config.use_detection_features and not isinstance(
            self.detector, NullProvider
        )

    def forward(
        self, visible_rgb: torch.Tensor, infrared: torch.Tensor
    ) -> torch.Tensor:
        visible_y = luminance(visible_rgb)
        pyr_vis, pyr_ir = self.encoder(visible_y, infrared)

        fused = []
        for block, fvis, fir in zip(
            self.detail_blocks, pyr_vis.spatial, pyr_ir.spatial
        ):
            out = block(fvis, fir)
            fused.append(out[0] if isinstance(out, tuple) else out)

        if self.uses_detection:
            det = self.detector.features(visible_rgb, infrared)
            det_levels = (det.level4, det.level5)
        else:
            det_levels = (None, None)
        for block, fvis, fir, fdet in zip(
            self.semantic_blocks, pyr_vis.semantic, pyr_ir.semantic, det_levels
        ):
            if isinstance(block, SemanticFusionBlock):
                fused.append(block(fvis, fir, fdet))
            else:
                fused.append(block(fvis, fir))

        return self.reconstructor(fused)

    @torch.no_grad()
    def fuse_arrays(
        self, visible: np.ndarray, infrared: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Fuse numpy HxWx3 / HxWx1 images; returns (fused_y HxWx1, rgb HxWx3).

        Runs in eval mode without gradients; restores the previous mode.
        """
        was_training = self.training
        self.eval()
        try:
            vis_t = torch.from_numpy(
                np.ascontiguousarray(visible.transpose(2, 0, 1))[None]
            ).float()
            ir_t = torch.from_numpy(
                np.ascontiguousarray(infrared.transpose(2, 0, 1))[None]
            ).float()
            fused = self.forward(vis_t, ir_t)
        finally:
            self.train(was_training)
        fused_y = fused[0].permute(1, 2, 0).numpy().astype(np.float32)
        return fused_y, recompose_color(fused_y, visible)
