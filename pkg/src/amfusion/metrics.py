"""Fusion-quality metrics: entropy, mutual information, standard deviation.

All metrics quantize [0, 1] intensities into 256 bins (8-bit convention):
bin index = min(floor(v * 256), 255). Inputs are numpy arrays shaped H x W
or H x W x 1; computation is float64 throughout.
"""

from dataclasses import dataclass

import numpy as np

from .data import MetricReport
from .errors import ShapeMismatch

BINS = 256


@dataclass
class Histogram:
    """256-bin intensity histogram with counts and normalized probabilities."""

    counts: np.ndarray
    probabilities: np.ndarray

    @property
    def pixel_count(self) -> int:
        return int(self.counts.sum())


def _flatten(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ShapeMismatch(f"expected HxW or HxWx1, got {arr.shape}")
    return arr.ravel()


def bin_indices(values: np.ndarray) -> np.ndarray:
    """Quantize [0, 1] floats to 256 integer bins; 1.0 lands in bin 255."""
    return np.minimum((values * BINS).astype(np.int64), BINS - 1)


def intensity_histogram(image: np.ndarray) -> Histogram:
    flat = _flatten(image)
    counts = np.bincount(bin_indices(flat), minlength=BINS)
    return Histogram(counts=counts, probabilities=counts / flat.size)


def entropy(image: np.ndarray) -> float:
    """Shannon entropy in bits of the 256-bin intensity histogram."""
    p = intensity_histogram(image).probabilities
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _pairwise_mi(a: np.ndarray, b: np.ndarray) -> float:
    ia, ib = bin_indices(a), bin_indices(b)
    joint = np.bincount(ia * BINS + ib, minlength=BINS * BINS).reshape(BINS, BINS)
    p_joint = joint / a.size
    p_a = p_joint.sum(axis=1)
    p_b = p_joint.sum(axis=0)
    outer = p_a[:, None] * p_b[None, :]
    mask = p_joint > 0
    return float((p_joint[mask] * np.log2(p_joint[mask] / outer[mask])).sum())


def mutual_information(
    fused: np.ndarray, visible_y: np.ndarray, infrared: np.ndarray
) -> float:
    """Summed MI in bits between the fused image and each source."""
    f = _flatten(fused)
    v = _flatten(visible_y)
    g = _flatten(infrared)
    if f.size != v.size or f.size != g.size:
        raise ShapeMismatch("metric inputs must share H x W")
    return _pairwise_mi(f, v) + _pairwise_mi(f, g)


def standard_deviation(image: np.ndarray) -> float:
    """Population standard deviation on the 0-255 intensity scale."""
    return float(np.std(_flatten(image) * 255.0))


def metric_report(
    fused: np.ndarray, visible_y: np.ndarray, infrared: np.ndarray
) -> MetricReport:
    return MetricReport(
        en=entropy(fused),
        mi=mutual_information(fused, visible_y, infrared),
        sd=standard_deviation(fused),
    )
