"""Semantic fusion for the low-resolution pyramid levels (4-5).

Cross-attention couples each modality's semantic tokens with detection
tokens: detection queries read each modality, a merged modality query reads
the detection stream, and the two residual streams are normalized, projected
and re-assembled into a feature map. Without a detector the detection stream
is derived from the two modalities themselves.
"""

import math

import torch
import torch.nn as nn

from .errors import BadShape, HeadDivisibility, ShapeMismatch


def multi_head_attention(q, k, v, heads):
    """Scaled dot-product attention over (B, N, C) tokens.

    Returns (output, probabilities); probabilities has shape (B, heads, N, N)
    and each row sums to 1.
    """
    b, n, c = q.shape
    if c % heads:
        raise HeadDivisibility(f"{c} channels not divisible by {heads} heads")
    d = c // heads

    def split(t):
        return t.reshape(b, -1, heads, d).transpose(1, 2)

    qh, kh, vh = split(q), split(k), split(v)
    scores = qh @ kh.transpose(-2, -1) / math.sqrt(d)
    probs = torch.softmax(scores, dim=-1)
    out = (probs @ vh).transpose(1, 2).reshape(b, n, c)
    return out, probs


class SemanticFusionBlock(nn.Module):
    """Detection-guided cross-attention fusion at one pyramid level."""

    def __init__(self, channels, heads):
        super().__init__()
        if channels % heads:
            raise HeadDivisibility(f"{channels} channels not divisible by {heads} heads")
        self.channels = channels
        self.heads = heads
        self.embed_vis = nn.Linear(channels, 3 * channels)
        self.embed_ir = nn.Linear(channels, 3 * channels)
        self.embed_det = nn.Linear(channels, 3 * channels)
        self.merge_queries = nn.Conv2d(2 * channels, channels, 1)
        self.self_detection = nn.Conv2d(2 * channels, channels, 1)
        self.norm_vis = nn.LayerNorm(channels)
        self.norm_ir = nn.LayerNorm(channels)
        self.project_vis = nn.Linear(channels, channels)
        self.project_ir = nn.Linear(channels, channels)
        self.out_conv = nn.Conv2d(2 * channels, channels, 3, padding=1)
        self.last_attention = {}

    def _tokens(self, feat):
        b, c, h, w = feat.shape
        return feat.flatten(2).transpose(1, 2), (b, c, h, w)

    def attention_streams(self, fvis, fir, fdet=None):
        """The position-equivariant core: both residual streams as maps.

        Everything up to (but excluding) the final 3x3 convolution, which is
        the only stage that couples neighbouring positions.
        """
        if fvis.shape != fir.shape:
            raise ShapeMismatch(f"{tuple(fvis.shape)} vs {tuple(fir.shape)}")
        if fvis.shape[1] != self.channels:
            raise BadShape(f"expected {self.channels} channels, got {fvis.shape[1]}")
        if fdet is None:
            fdet = self.self_detection(torch.cat([fvis, fir], dim=1))
        elif fdet.shape != fvis.shape:
            raise ShapeMismatch(f"detection {tuple(fdet.shape)} vs {tuple(fvis.shape)}")

        tok_vis, (b, c, h, w) = self._tokens(fvis)
        tok_ir, _ = self._tokens(fir)
        tok_det, _ = self._tokens(fdet)
        q_vis, k_vis, v_vis = self.embed_vis(tok_vis).chunk(3, dim=-1)
        q_ir, k_ir, v_ir = self.embed_ir(tok_ir).chunk(3, dim=-1)
        q_det, k_det, v_det = self.embed_det(tok_det).chunk(3, dim=-1)

        att_vis, p_vis = multi_head_attention(q_det, k_vis, v_vis, self.heads)
        att_ir, p_ir = multi_head_attention(q_det, k_ir, v_ir, self.heads)

        stacked = torch.cat(
            [self._unflatten(q_vis, b, c, h, w), self._unflatten(q_ir, b, c, h, w)],
            dim=1,
        )
        q_merged, _ = self._tokens(self.merge_queries(stacked))
        att_det, p_det = multi_head_attention(q_merged, k_det, v_det, self.heads)
        self.last_attention = {
            "vis": p_vis.detach(), "ir": p_ir.detach(), "det": p_det.detach()
        }

        stream_vis = self.project_vis(self.norm_vis(att_det + att_vis))
        stream_ir = self.project_ir(self.norm_ir(att_det + att_ir))
        return (
            self._unflatten(stream_vis, b, c, h, w),
            self._unflatten(stream_ir, b, c, h, w),
        )

    def forward(self, fvis, fir, fdet=None):
        stream_vis, stream_ir = self.attention_streams(fvis, fir, fdet)
        return self.out_conv(torch.cat([stream_vis, stream_ir], dim=1))

    def fuse_semantic(self, fvis, fir, fdet):
        return self.forward(fvis, fir, fdet)

    def fuse_semantic_self(self, fvis, fir):
        return self.forward(fvis, fir, None)

    @staticmethod
    def _unflatten(tokens, b, c, h, w):
        return tokens.transpose(1, 2).reshape(b, c, h, w)


class SelfAttentionFusionBlock(nn.Module):
    """Ablation stand-in: one self-attention pass over the merged modalities
    instead of the detection-guided cross-attention."""

    def __init__(self, channels, heads):
        super().__init__()
        if channels % heads:
            raise HeadDivisibility(f"{channels} channels not divisible by {heads} heads")
        self.heads = heads
        self.merge = nn.Conv2d(2 * channels, channels, 1)
        self.embed = nn.Linear(channels, 3 * channels)
        self.norm = nn.LayerNorm(channels)
        self.project = nn.Linear(channels, channels)
        self.out_conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, fvis, fir):
        if fvis.shape != fir.shape:
            raise ShapeMismatch(f"{tuple(fvis.shape)} vs {tuple(fir.shape)}")
        merged = self.merge(torch.cat([fvis, fir], dim=1))
        b, c, h, w = merged.shape
        tokens = merged.flatten(2).transpose(1, 2)
        q, k, v = self.embed(tokens).chunk(3, dim=-1)
        att, _ = multi_head_attention(q, k, v, self.heads)
        tokens = self.project(self.norm(att + tokens))
        return self.out_conv(tokens.transpose(1, 2).reshape(b, c, h, w))
