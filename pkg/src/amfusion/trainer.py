"""Two-phase training, checkpointing, and batch fusion/evaluation.

Phase 1 trains the fusion network with the detection provider frozen;
phase 2 unfreezes everything and fine-tunes at a lower rate. Each phase
follows its own cosine learning-rate decay whose first and last steps hit
the configured endpoints exactly.
"""

import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from . import detection
from .data import (
    DIVISOR,
    FusionConfig,
    ImagePair,
    MetricReport,
    load_image_pair,
    random_crop,
    save_config,
    save_png,
    to_luminance,
)
from .errors import CheckpointError, ConfigError, EmptyDataset, NonFiniteLoss
from .losses import LossInputs, loss_terms
from .metrics import metric_report
from .network import AMFusionNet, luminance
from .synth import read_manifest

FORMAT_VERSION = 1
LOSS_LOG_NAME = "loss_log.csv"
CHECKPOINT_NAME = "checkpoint.pt"
LOG_COLUMNS = ("step", "lr", "grad", "ssim", "int_ill", "exp", "total")


@dataclass
class TrainSchedule:
    """Epochs, learning-rate endpoints, and batching for the two phases."""

    phase1_epochs: int = 200
    phase2_epochs: int = 50
    phase1_lr_start: float = 2e-4
    phase1_lr_end: float = 1e-6
    phase2_lr_start: float = 1e-6
    phase2_lr_end: float = 1e-8
    batch: int = 16
    crop: int = 256
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        if self.phase1_epochs < 1 or self.phase2_epochs < 1:
            raise ConfigError("each phase needs at least one epoch")
        if self.phase1_lr_end > self.phase1_lr_start:
            raise ConfigError("phase 1 lr_end must not exceed lr_start")
        if self.phase2_lr_end > self.phase2_lr_start:
            raise ConfigError("phase 2 lr_end must not exceed lr_start")
        if self.phase1_lr_end <= 0 or self.phase2_lr_end <= 0:
            raise ConfigError("learning rates must be positive")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        if self.crop < DIVISOR or self.crop % DIVISOR:
            raise ConfigError(f"crop must be a positive multiple of {DIVISOR}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("momentum coefficients must lie in [0, 1)")

    @classmethod
    def paper(cls) -> "TrainSchedule":
        return cls()

    @classmethod
    def desk(cls) -> "TrainSchedule":
        """Reduced schedule for CI-scale runs."""
        return cls(phase1_epochs=50, phase2_epochs=10, batch=4, crop=64)

    @property
    def phases(self):
        """((epochs, lr_start, lr_end) for phase 1, same for phase 2)."""
        return (
            (self.phase1_epochs, self.phase1_lr_start, self.phase1_lr_end),
            (self.phase2_epochs, self.phase2_lr_start, self.phase2_lr_end),
        )


def cosine_lr(step: int, total_steps: int, start: float, end: float) -> float:
    """Cosine decay from start to end over total_steps optimizer steps.

    Step 0 returns start and step total_steps-1 returns end (both exact up
    to one rounding); a single-step phase returns start.
    """
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps})")
    if total_steps == 1:
        return start
    t = step / (total_steps - 1)
    return end + 0.5 * (start - end) * (1.0 + math.cos(math.pi * t))


@dataclass
class Checkpoint:
    """Self-describing training snapshot; save/load round-trips bitwise."""

    config: FusionConfig
    schedule: TrainSchedule
    model_state: dict
    seed: int
    phase: int
    epoch: int
    global_step: int
    torch_rng: torch.Tensor = field(default_factory=torch.get_rng_state)
    format_version: int = FORMAT_VERSION

    def save(self, path) -> None:
        payload = {
            "format_version": self.format_version,
            "config": dataclasses.asdict(self.config),
            "schedule": dataclasses.asdict(self.schedule),
            "model_state": self.model_state,
            "seed": self.seed,
            "phase": self.phase,
            "epoch": self.epoch,
            "global_step": self.global_step,
            "torch_rng": self.torch_rng,
        }
        torch.save(payload, path)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        if not os.path.exists(path):
            raise CheckpointError(f"no checkpoint at '{path}'")
        try:
            payload = torch.load(path, weights_only=False)
        except Exception as exc:
            raise CheckpointError(f"cannot read checkpoint '{path}': {exc}") from exc
        if not isinstance(payload, dict) or "format_version" not in payload:
            raise CheckpointError(f"'{path}' is not a fusion checkpoint")
        version = payload["format_version"]
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"checkpoint format {version} unsupported (expected {FORMAT_VERSION})"
            )
        return cls(
            config=FusionConfig(**payload["config"]),
            schedule=TrainSchedule(**payload["schedule"]),
            model_state=payload["model_state"],
            seed=payload["seed"],
            phase=payload["phase"],
            epoch=payload["epoch"],
            global_step=payload["global_step"],
            torch_rng=payload["torch_rng"],
            format_version=version,
        )

    def build_model(self) -> AMFusionNet:
        model = AMFusionNet(self.config)
        model.load_state_dict(self.model_state)
        model.eval()
        return model


def load_dataset(dataset_dir) -> list[ImagePair]:
    """All manifest-listed pairs, fully loaded into memory."""
    ids = read_manifest(dataset_dir)
    if not ids:
        raise EmptyDataset(f"no manifest-listed pairs in '{dataset_dir}'")
    return [
        load_image_pair(
            os.path.join(dataset_dir, f"{pid}_vis.png"),
            os.path.join(dataset_dir, f"{pid}_ir.png"),
            pair_id=pid,
        )
        for pid in ids
    ]


def _batch_tensors(pairs: list[ImagePair]) -> tuple[torch.Tensor, torch.Tensor]:
    vis = np.stack([p.visible.transpose(2, 0, 1) for p in pairs])
    ir = np.stack([p.infrared.transpose(2, 0, 1) for p in pairs])
    return torch.from_numpy(vis).float(), torch.from_numpy(ir).float()


def train(
    dataset_dir,
    config: FusionConfig,
    schedule: TrainSchedule,
    out_dir,
    seed: int = 0,
) -> Checkpoint:
    """Run both phases; returns the final checkpoint (also on disk).

    Writes `loss_log.csv` (one row per optimizer step) and refreshes
    `checkpoint.pt` after every epoch. Batching drops the last incomplete
    batch, except that a dataset smaller than the batch size still yields
    one (smaller) step per epoch.
    """
    pairs = load_dataset(dataset_dir)
    os.makedirs(out_dir, exist_ok=True)
    save_config(config, os.path.join(out_dir, "config.txt"))

    torch.manual_seed(seed)
    model = AMFusionNet(config)
    rng = np.random.default_rng(seed)
    ckpt_path = os.path.join(out_dir, CHECKPOINT_NAME)
    checkpoint = None
    global_step = 0

    with open(os.path.join(out_dir, LOSS_LOG_NAME), "w", encoding="utf-8") as log:
        log.write(",".join(LOG_COLUMNS) + "\n")
        for phase, (epochs, lr_start, lr_end) in enumerate(schedule.phases, start=1):
            if phase == 1:
                detection.freeze(model.detector)
            else:
                detection.unfreeze(model.detector)
            optimizer = torch.optim.Adam(
                [p for p in model.parameters() if p.requires_grad],
                lr=lr_start,
                betas=(schedule.beta1, schedule.beta2),
            )
            steps_per_epoch = max(len(pairs) // schedule.batch, 1)
            total_steps = epochs * steps_per_epoch
            phase_step = 0
            for epoch in range(epochs):
                order = rng.permutation(len(pairs))
                for b in range(steps_per_epoch):
                    chosen = order[b * schedule.batch : (b + 1) * schedule.batch]
                    batch = [
                        random_crop(
                            pairs[int(i)],
                            schedule.crop,
                            seed=int(rng.integers(0, 2**63)),
                        )
                        for i in chosen
                    ]
                    lr = cosine_lr(phase_step, total_steps, lr_start, lr_end)
                    for group in optimizer.param_groups:
                        group["lr"] = lr

                    vis, ir = _batch_tensors(batch)
                    fused = model(vis, ir)
                    terms = loss_terms(
                        LossInputs(
                            fused=fused,
                            visible_rgb=vis,
                            visible_y=luminance(vis),
                            infrared=ir,
                        ),
                        config,
                    )
                    for name, value in terms.items():
                        if not bool(torch.isfinite(value)):
                            raise NonFiniteLoss(
                                f"loss term '{name}' is non-finite at step {global_step}"
                            )
                    optimizer.zero_grad()
                    terms["total"].backward()
                    optimizer.step()

                    log.write(
                        f"{global_step},{lr:.12g},"
                        + ",".join(
                            f"{float(terms[k].detach()):.12g}"
                            for k in ("grad", "ssim", "int_ill", "exp", "total")
                        )
                        + "\n"
                    )
                    phase_step += 1
                    global_step += 1
                checkpoint = Checkpoint(
                    config=config,
                    schedule=schedule,
                    model_state=model.state_dict(),
                    seed=seed,
                    phase=phase,
                    epoch=epoch,
                    global_step=global_step,
                )
                checkpoint.save(ckpt_path)
    return checkpoint


def fuse(checkpoint_path, visible_path, infrared_path, out_path) -> np.ndarray:
    """Fuse one pair through a checkpointed model and write the RGB PNG."""
    model = Checkpoint.load(checkpoint_path).build_model()
    pair = load_image_pair(visible_path, infrared_path)
    _, rgb = model.fuse_arrays(pair.visible, pair.infrared)
    save_png(rgb, out_path)
    return rgb


def evaluate(checkpoint_path, dataset_dir, out_csv) -> list[tuple[str, MetricReport]]:
    """Per-image and mean entropy/mutual-information/contrast metrics.

    Returns [(pair_id, report), ..., ("mean", mean_report)] and writes the
    same rows as CSV.
    """
    model = Checkpoint.load(checkpoint_path).build_model()
    pairs = load_dataset(dataset_dir)
    rows = []
    for pair in pairs:
        fused_y, _ = model.fuse_arrays(pair.visible, pair.infrared)
        rows.append(
            (pair.id, metric_report(fused_y, to_luminance(pair.visible), pair.infrared))
        )
    mean = MetricReport(
        en=float(np.mean([r.en for _, r in rows])),
        mi=float(np.mean([r.mi for _, r in rows])),
        sd=float(np.mean([r.sd for _, r in rows])),
    )
    rows.append(("mean", mean))
    with open(out_csv, "w", encoding="utf-8") as fh:
        fh.write("id,en,mi,sd\n")
        for pair_id, report in rows:
            fh.write(f"{pair_id},{report.en:.9f},{report.mi:.9f},{report.sd:.9f}\n")
    return rows
