"""Synthetic night-scene generator.

Degrades a clean scene by an elementwise illumination field plus additive
glare blobs, D = clamp(O * L + S), and derives an infrared proxy from the
clean scene only, so the proxy is insensitive to the injected illumination.
Everything is deterministic in the params seed.
"""

import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .data import ImagePair, save_png, to_luminance
from .errors import ConfigError

FIELD_FLOOR = 0.2  # darkest value of the smooth low-light field before scaling


@dataclass
class DegradationParams:
    lowlight_scale: float = 0.5
    num_glare: int = 2
    glare_sigma: float = 8.0
    glare_peak: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.lowlight_scale <= 1.0:
            raise ConfigError("lowlight_scale must lie in (0, 1]")
        if self.num_glare < 0:
            raise ConfigError("num_glare must be >= 0")
        if self.glare_sigma <= 0.0:
            raise ConfigError("glare_sigma must be > 0")
        if not 0.0 < self.glare_peak <= 1.0:
            raise ConfigError("glare_peak must lie in (0, 1]")


def degradation_fields(
    height: int, width: int, params: DegradationParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Low-light field L, glare field S, and glare centers, seeded.

    L is lowlight_scale times a Gaussian-blurred noise field rescaled to
    [0.2, 1]; S is a sum of isotropic Gaussian blobs at uniform random
    centers. Centers have shape (num_glare, 2) as (row, col).
    """
    rng = np.random.default_rng(params.seed)
    noise = rng.random((height, width))
    field = gaussian_filter(noise, sigma=height / 8.0, mode="reflect")
    span = field.max() - field.min()
    if span < 1e-12:
        field = np.ones_like(field)
    else:
        field = FIELD_FLOOR + (1.0 - FIELD_FLOOR) * (field - field.min()) / span
    lowlight = params.lowlight_scale * field

    centers = np.stack(
        [rng.uniform(0, height, params.num_glare), rng.uniform(0, width, params.num_glare)],
        axis=-1,
    ) if params.num_glare else np.zeros((0, 2))
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    glare = np.zeros((height, width))
    for cy, cx in centers:
        dist_sq = (rows - cy) ** 2 + (cols - cx) ** 2
        glare += params.glare_peak * np.exp(-dist_sq / (2.0 * params.glare_sigma ** 2))
    return lowlight, glare, centers


def apply_degradation(
    scene: np.ndarray, lowlight: np.ndarray, glare: np.ndarray
) -> np.ndarray:
    """clamp(scene * L + S) with the fields broadcast over colour channels."""
    degraded = scene * lowlight[:, :, None] + glare[:, :, None]
    return np.clip(degraded, 0.0, 1.0)


def infrared_proxy(scene: np.ndarray) -> np.ndarray:
    """Thermal stand-in: contrast-stretched luminance of the clean scene.

    Percentile stretch followed by a smoothstep curve emphasizes bright
    objects the way warm targets stand out thermally. Depends on the clean
    scene only, never on the injected illumination.
    """
    y = to_luminance(scene)
    lo, hi = np.percentile(y, 1.0), np.percentile(y, 99.0)
    if hi - lo < 1e-9:
        return y.astype(scene.dtype)
    stretched = np.clip((y - lo) / (hi - lo), 0.0, 1.0)
    return (stretched * stretched * (3.0 - 2.0 * stretched)).astype(scene.dtype)


def synthesize_pair(
    base_scene: np.ndarray, params: DegradationParams, pair_id: str = "synth"
) -> tuple[ImagePair, np.ndarray]:
    """Degrade a clean HxWx3 scene into a training pair; returns (pair, clean)."""
    h, w = base_scene.shape[:2]
    lowlight, glare, _ = degradation_fields(h, w, params)
    degraded = apply_degradation(base_scene, lowlight, glare).astype(np.float32)
    infrared = infrared_proxy(base_scene).astype(np.float32)
    pair = ImagePair(visible=degraded, infrared=infrared, id=pair_id)
    return pair, base_scene


def random_scene(size: int, rng: np.random.Generator) -> np.ndarray:
    """Clean mid-tone scene: smooth background plus bright box/disc objects."""
    background = np.empty((size, size, 3))
    for c in range(3):
        background[:, :, c] = gaussian_filter(rng.random((size, size)), sigma=size / 6.0)
        span = background[:, :, c].max() - background[:, :, c].min()
        if span > 1e-12:
            background[:, :, c] = (background[:, :, c] - background[:, :, c].min()) / span
    scene = 0.2 + 0.35 * background

    rows = np.arange(size)[:, None]
    cols = np.arange(size)[None, :]
    for _ in range(int(rng.integers(2, 5))):
        color = rng.uniform(0.55, 0.95, size=3)
        cy, cx = rng.uniform(0.15 * size, 0.85 * size, size=2)
        ry, rx = rng.uniform(0.06 * size, 0.2 * size, size=2)
        if rng.random() < 0.5:
            mask = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0
        else:
            mask = (np.abs(rows - cy) <= ry) & (np.abs(cols - cx) <= rx)
        scene[mask] = color
    return np.clip(scene, 0.0, 1.0).astype(np.float32)


MANIFEST_NAME = "manifest.txt"


def write_dataset(out_dir, n: int, size: int, seed: int) -> list[str]:
    """Write n synthetic pairs plus clean ground truth and a manifest.

    Files per id: {id}_vis.png, {id}_ir.png, {id}_gt.png. The manifest lists
    one id per line followed by the degradation parameters used.
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    ids = []
    lines = ["# id lowlight_scale num_glare glare_sigma glare_peak seed"]
    for i in range(n):
        pair_id = f"scene{i:04d}"
        params = DegradationParams(
            lowlight_scale=float(rng.uniform(0.3, 0.8)),
            num_glare=int(rng.integers(1, 4)),
            glare_sigma=float(rng.uniform(size / 16.0, size / 6.0)),
            glare_peak=float(rng.uniform(0.7, 1.0)),
            seed=int(rng.integers(0, 2 ** 31)),
        )
        scene = random_scene(size, rng)
        pair, clean = synthesize_pair(scene, params, pair_id=pair_id)
        save_png(pair.visible, os.path.join(out_dir, f"{pair_id}_vis.png"))
        save_png(pair.infrared, os.path.join(out_dir, f"{pair_id}_ir.png"))
        save_png(clean, os.path.join(out_dir, f"{pair_id}_gt.png"))
        lines.append(
            f"{pair_id} lowlight_scale={params.lowlight_scale:.6f} "
            f"num_glare={params.num_glare} glare_sigma={params.glare_sigma:.6f} "
            f"glare_peak={params.glare_peak:.6f} seed={params.seed}"
        )
        ids.append(pair_id)
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return ids


def read_manifest(dataset_dir) -> list[str]:
    """Ids listed in a dataset manifest; empty list if the file is missing."""
    path = os.path.join(dataset_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        return []
    ids = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                ids.append(line.split()[0])
    return ids
