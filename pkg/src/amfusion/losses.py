"""Unsupervised objective for night-scene fusion.

The stack combines a Sobel gradient term, an SSIM structure term and an
illumination term. The illumination term re-weights visible intensity by a
per-pixel Gaussian bump centred at mid-intensity, so both dark pixels and
glare pixels stop dominating the intensity target, and adds an exposure
control penalty over local patches.

All functions accept (B, C, H, W) float tensors in [0, 1], are differentiable
and preserve dtype/device; batched inputs are averaged per image.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .data import FusionConfig, LossReport
from .errors import PatchMismatch, ShapeMismatch, TooSmall

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


@dataclass
class LossInputs:
    """Tensors the objective consumes: all (B, C, H, W) in [0, 1]."""

    fused: torch.Tensor        # (B, 1, H, W)
    visible_rgb: torch.Tensor  # (B, 3, H, W)
    visible_y: torch.Tensor    # (B, 1, H, W)
    infrared: torch.Tensor     # (B, 1, H, W)

    def __post_init__(self):
        b, _, h, w = self.fused.shape
        for name in ("visible_rgb", "visible_y", "infrared"):
            t = getattr(self, name)
            if t.shape[0] != b or t.shape[2:] != (h, w):
                raise ShapeMismatch(f"{name} {tuple(t.shape)} vs fused {tuple(self.fused.shape)}")


def illumination_weight(visible_rgb: torch.Tensor, sigma: float = 0.2) -> torch.Tensor:
    """Per-pixel weight in (0, 1], peaking at mid intensity.

    Mean over the three colour channels of exp(-(c - 0.5)^2 / (2 sigma^2)).
    Down-weights both low-light and over-exposed pixels.
    """
    bump = torch.exp(-((visible_rgb - 0.5) ** 2) / (2.0 * sigma * sigma))
    return bump.mean(dim=1, keepdim=True)


def intensity_loss_ill(
    fused: torch.Tensor,
    visible_rgb: torch.Tensor,
    visible_y: torch.Tensor,
    infrared: torch.Tensor,
    sigma: float = 0.2,
) -> torch.Tensor:
    """Illumination-weighted intensity loss.

    Euclidean norm of fused minus the elementwise max of the re-weighted
    visible intensity and the infrared intensity, divided by H*W.
    """
    _check_same_shape(fused, visible_y, infrared)
    if visible_rgb.shape[2:] != fused.shape[2:]:
        raise ShapeMismatch("visible_rgb spatial size differs from fused")
    w_ill = illumination_weight(visible_rgb, sigma)
    target = torch.maximum(w_ill * visible_y, infrared)
    h, w = fused.shape[2:]
    residual = (fused - target).reshape(fused.shape[0], -1)
    return (residual.norm(p=2, dim=1) / (h * w)).mean()


def exposure_loss(fused: torch.Tensor, patch: int = 16, level: float = 0.6) -> torch.Tensor:
    """Mean |patch mean - level| over non-overlapping patch x patch blocks."""
    h, w = fused.shape[2:]
    if h % patch or w % patch:
        raise PatchMismatch(f"{h}x{w} not divisible by patch {patch}")
    block_means = F.avg_pool2d(fused, kernel_size=patch, stride=patch)
    return (block_means - level).abs().mean(dim=(1, 2, 3)).mean()


def _sobel_magnitude(image: torch.Tensor) -> torch.Tensor:
    """|horizontal response| + |vertical response| with reflect padding."""
    kx = torch.tensor(
        [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]],
        dtype=image.dtype, device=image.device,
    ).view(1, 1, 3, 3)
    ky = kx.transpose(2, 3)
    padded = F.pad(image, (1, 1, 1, 1), mode="reflect")
    gx = F.conv2d(padded, kx)
    gy = F.conv2d(padded, ky)
    return gx.abs() + gy.abs()


def gradient_loss(
    fused: torch.Tensor, visible_y: torch.Tensor, infrared: torch.Tensor
) -> torch.Tensor:
    """L1 distance between the fused Sobel magnitude and the sources' max."""
    _check_same_shape(fused, visible_y, infrared)
    h, w = fused.shape[2:]
    if h < 3 or w < 3:
        raise TooSmall("gradient loss needs H, W >= 3")
    target = torch.maximum(_sobel_magnitude(visible_y), _sobel_magnitude(infrared))
    residual = _sobel_magnitude(fused) - target
    return (residual.abs().sum(dim=(1, 2, 3)) / (h * w)).mean()


def _gaussian_window(dtype, device) -> torch.Tensor:
    half = SSIM_WINDOW // 2
    coords = torch.arange(-half, half + 1, dtype=dtype, device=device)
    g = torch.exp(-(coords ** 2) / (2.0 * SSIM_SIGMA ** 2))
    window = g[:, None] * g[None, :]
    window = window / window.sum()
    return window.view(1, 1, SSIM_WINDOW, SSIM_WINDOW)


def ssim(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean SSIM over valid 11x11 Gaussian windows, data range [0, 1]."""
    _check_same_shape(a, b)
    h, w = a.shape[2:]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise TooSmall(f"SSIM needs H, W >= {SSIM_WINDOW}")
    window = _gaussian_window(a.dtype, a.device)
    mu_a = F.conv2d(a, window)
    mu_b = F.conv2d(b, window)
    var_a = F.conv2d(a * a, window) - mu_a ** 2
    var_b = F.conv2d(b * b, window) - mu_b ** 2
    cov = F.conv2d(a * b, window) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return (num / den).mean(dim=(1, 2, 3)).mean()


def ssim_loss(
    fused: torch.Tensor, visible_y: torch.Tensor, infrared: torch.Tensor
) -> torch.Tensor:
    """(1 - SSIM(fused, visible))/2 + (1 - SSIM(fused, infrared))/2."""
    return (1.0 - ssim(fused, visible_y)) / 2.0 + (1.0 - ssim(fused, infrared)) / 2.0


def loss_terms(inputs: LossInputs, config: FusionConfig) -> dict[str, torch.Tensor]:
    """All enabled loss terms plus the weighted total, as scalar tensors.

    Disabled terms are reported as zero and contribute nothing to the total:
    total = grad + alpha * ssim + beta * (int_ill + eta * exp).
    """
    zero = torch.zeros((), dtype=inputs.fused.dtype, device=inputs.fused.device)
    grad = gradient_loss(inputs.fused, inputs.visible_y, inputs.infrared)
    struct = ssim_loss(inputs.fused, inputs.visible_y, inputs.infrared)
    int_ill = zero
    exp = zero
    if config.use_ill_loss:
        if config.use_int_ill:
            int_ill = intensity_loss_ill(
                inputs.fused, inputs.visible_rgb, inputs.visible_y,
                inputs.infrared, config.sigma,
            )
        if config.use_exp:
            exp = exposure_loss(inputs.fused, config.exposure_patch, config.exposure_level)
    total = grad + config.alpha * struct + config.beta * (int_ill + config.eta * exp)
    return {"grad": grad, "ssim": struct, "int_ill": int_ill, "exp": exp, "total": total}


def total_loss(inputs: LossInputs, config: FusionConfig) -> LossReport:
    """Evaluate the full objective and return plain-float per-term values."""
    terms = loss_terms(inputs, config)
    return LossReport(**{k: float(v.detach()) for k, v in terms.items()})


def _check_same_shape(*tensors: torch.Tensor) -> None:
    first = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != first:
            raise ShapeMismatch(f"{tuple(t.shape)} vs {tuple(first)}")
