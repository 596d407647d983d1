"""Desk-scale adversarial fine-tuning of the generator.

Two discrete progressive stages: 4x4 (corpus area-downsampled, stage-1
output head) then 8x8 (full path). Non-saturating GAN loss, Adam with
betas (0.0, 0.99), a fresh 2-conv + dense discriminator per stage, and a
per-stage triangular learning-rate schedule (short warmup, linear decay).
The generator's 4x4-level parameters carry over into stage 2 untouched.
Everything is deterministic given the config seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import checkpoints
from .errors import EmptyCorpusError, ShapeMismatchError
from .generator import (
    DTYPE,
    GeneratorConfig,
    GeneratorWeights,
    leaky_softplus,
    mapping_forward,
    round_through_float32,
    synthesis_forward,
)
from .textures import FaceTexture, load_face, quantize
from PIL import Image


@dataclass(frozen=True)
class TrainConfig:
    stage1_iterations: int = 250
    stage2_iterations: int = 250
    stage1_batch: int = 32
    stage2_batch: int = 32
    g_lr: float = 2e-3
    d_lr: float = 2e-3
    seed: int = 0
    warm_start: str | None = None
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    sample_grid_every: int | None = None
    sample_dir: str | None = None

    def __post_init__(self):
        if self.stage1_iterations < 0 or self.stage2_iterations < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.stage1_batch < 1 or self.stage2_batch < 1:
            raise ValueError("batch sizes must be positive")
        if not (self.g_lr > 0 and self.d_lr > 0):
            raise ValueError("learning rates must be positive")
        if self.sample_grid_every is not None and self.sample_grid_every < 1:
            raise ValueError("sample_grid_every must be positive when set")

    @classmethod
    def full_scale(cls, **overrides) -> "TrainConfig":
        """The full production regime: 20K iterations split across the
        4x4 and 8x8 stages with batch sizes 1024 and 512. Hours of CPU time;
        not a test target."""
        base = cls(
            stage1_iterations=10_000,
            stage2_iterations=10_000,
            stage1_batch=1024,
            stage2_batch=512,
        )
        return replace(base, **overrides)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    stage_resolution: int
    g_loss: float
    d_loss: float
    real_score_mean: float
    fake_score_mean: float


@dataclass
class TrainLog:
    records: list[IterationRecord] = field(default_factory=list)
    failed: bool = False
    failure: str | None = None

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(
                    json.dumps(
                        {
                            "iteration": r.iteration,
                            "stage_resolution": r.stage_resolution,
                            "g_loss": r.g_loss,
                            "d_loss": r.d_loss,
                            "real_score_mean": r.real_score_mean,
                            "fake_score_mean": r.fake_score_mean,
                        }
                    )
                    + "\n"
                )
            if self.failed:
                fh.write(json.dumps({"failed": True, "failure": self.failure}) + "\n")


class Discriminator:
    """2-conv + dense realness scorer for one stage resolution."""

    def __init__(self, channels: int, resolution: int, params: dict[str, torch.Tensor]):
        self.channels = channels
        self.resolution = resolution
        self.params = params

    @classmethod
    def initialize(cls, channels: int, resolution: int, seed: int) -> "Discriminator":
        g = torch.Generator().manual_seed(seed)
        c = channels

        def randn(shape, std):
            return torch.randn(shape, generator=g, dtype=DTYPE) * std

        dense_in = c * resolution * resolution
        params = {
            "conv1.weight": randn((c, 3, 3, 3), (2.0 / 27) ** 0.5),
            "conv1.bias": torch.zeros(c, dtype=DTYPE),
            "conv2.weight": randn((c, c, 3, 3), (2.0 / (9 * c)) ** 0.5),
            "conv2.bias": torch.zeros(c, dtype=DTYPE),
            "dense.weight": randn((1, dense_in), (1.0 / dense_in) ** 0.5),
            "dense.bias": torch.zeros(1, dtype=DTYPE),
        }
        return cls(channels, resolution, params)


def discriminator_forward_tensor(disc: Discriminator, x: torch.Tensor) -> torch.Tensor:
    """Scores for a (B, 3, R, R) batch; differentiable."""
    if x.ndim != 4 or x.shape[1:] != (3, disc.resolution, disc.resolution):
        raise ShapeMismatchError(
            f"discriminator expects (B, 3, {disc.resolution}, {disc.resolution}), got {tuple(x.shape)}"
        )
    p = disc.params
    h = leaky_softplus(F.conv2d(x, p["conv1.weight"], p["conv1.bias"], padding=1))
    h = leaky_softplus(F.conv2d(h, p["conv2.weight"], p["conv2.bias"], padding=1))
    return (h.reshape(h.shape[0], -1) @ p["dense.weight"].T + p["dense.bias"]).squeeze(1)


def discriminator_forward(disc: Discriminator, faces) -> float | np.ndarray:
    """Realness score(s) for a face or a batch at the stage resolution.

    Accepts a FaceTexture, an (R,R,3) array, or a (B,R,R,3) batch; returns a
    float for single inputs, an order-preserving (B,) array for batches.
    """
    if isinstance(faces, FaceTexture):
        arr = np.array(faces.pixels)
    else:
        arr = np.array(faces, dtype=np.float64)
    single = arr.ndim == 3
    if single:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[3] != 3:
        raise ShapeMismatchError(f"expected (B,R,R,3) faces, got {arr.shape}")
    x = torch.from_numpy(np.ascontiguousarray(arr)).permute(0, 3, 1, 2)
    with torch.no_grad():
        scores = discriminator_forward_tensor(disc, x).numpy()
    return float(scores[0]) if single else scores


def load_corpus(corpus_dir: str | Path) -> np.ndarray:
    """All 8x8 face PNGs under a directory as an (N,8,8,3) float array."""
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise OSError(f"corpus directory not readable: {corpus_dir}")
    faces = []
    for path in sorted(corpus_dir.glob("*.png")):
        faces.append(load_face(path).pixels)
    if not faces:
        raise EmptyCorpusError(f"no face textures found in {corpus_dir}")
    return np.stack(faces)


def _downsample_to_4(x: torch.Tensor) -> torch.Tensor:
    return F.avg_pool2d(x, kernel_size=2)


def _nonsaturating_d_loss(real_scores, fake_scores):
    return F.softplus(-real_scores).mean() + F.softplus(fake_scores).mean()


def _nonsaturating_g_loss(fake_scores):
    return F.softplus(-fake_scores).mean()


def _write_sample_grid(
    config: GeneratorConfig,
    params: dict[str, torch.Tensor],
    resolution: int,
    z_grid: torch.Tensor,
    path: Path,
) -> None:
    with torch.no_grad():
        w = mapping_forward(params, config.mapping_depth, z_grid)
        wp = w.unsqueeze(1).expand(-1, 2, -1)
        imgs = synthesis_forward(config, params, wp, None, resolution=resolution)
    grid = imgs.permute(0, 2, 3, 1).clamp(0.0, 1.0).numpy()
    side = int(math.isqrt(grid.shape[0]))
    sheet = grid.reshape(side, side, resolution, resolution, 3)
    sheet = sheet.transpose(0, 2, 1, 3, 4).reshape(side * resolution, side * resolution, 3)
    Image.fromarray(quantize(sheet), mode="RGB").save(path, format="PNG")


def train(
    corpus_dir: str | Path,
    config: TrainConfig | None = None,
    progress_cb=None,
) -> tuple[GeneratorWeights, TrainLog]:
    """Run the two-stage adversarial fine-tune over a face corpus.

    Returns the final weights (float32-rounded, checkpoint-exact) and the
    full iteration log. A non-finite loss stops training early; the partial
    log comes back with its failure marker set instead of an exception.
    """
    config = config or TrainConfig()
    corpus = torch.from_numpy(load_corpus(corpus_dir)).permute(0, 3, 1, 2)
    corpus4 = _downsample_to_4(corpus)

    if config.warm_start is not None:
        start = checkpoints.load_weights(config.warm_start)
    else:
        start = GeneratorWeights.initialize(config.generator, seed=config.seed)
    gen_config = start.config

    g_params = {k: v.clone().requires_grad_(True) for k, v in start.params.items()}
    stream = torch.Generator().manual_seed(config.seed + 1)
    z_grid = torch.randn((16, gen_config.latent_dim), dtype=DTYPE,
                         generator=torch.Generator().manual_seed(config.seed + 4))

    log = TrainLog()
    total_iters = config.stage1_iterations + config.stage2_iterations
    done = 0

    sample_dir = Path(config.sample_dir) if config.sample_dir else None
    if sample_dir is not None:
        sample_dir.mkdir(parents=True, exist_ok=True)

    stages = (
        (4, config.stage1_iterations, config.stage1_batch, corpus4, config.seed + 2),
        (8, config.stage2_iterations, config.stage2_batch, corpus, config.seed + 3),
    )
    for resolution, iters, batch, reals, d_seed in stages:
        if iters == 0 or log.failed:
            continue
        disc = Discriminator.initialize(gen_config.channels, resolution, d_seed)
        d_params = {k: v.requires_grad_(True) for k, v in disc.params.items()}
        g_opt = torch.optim.Adam(list(g_params.values()), lr=config.g_lr, betas=(0.0, 0.99))
        d_opt = torch.optim.Adam(list(d_params.values()), lr=config.d_lr, betas=(0.0, 0.99))
        warmup = max(1, min(50, iters // 5))

        for it in range(iters):
            # A fresh discriminator's first gradients are noise; ramp the
            # rates in so the generator cannot be kicked into tanh
            # saturation before scores mean anything, then anneal to zero
            # so the endpoint is pinned instead of orbited.
            lr_scale = min((it + 1) / warmup, 1.0 - it / iters)
            for group in g_opt.param_groups:
                group["lr"] = config.g_lr * lr_scale
            for group in d_opt.param_groups:
                group["lr"] = config.d_lr * lr_scale
            idx = torch.randint(0, reals.shape[0], (batch,), generator=stream)
            real = reals[idx]
            z = torch.randn((batch, gen_config.latent_dim), generator=stream, dtype=DTYPE)
            n0 = torch.randn((batch, 1, 4, 4), generator=stream, dtype=DTYPE)
            n1 = (
                torch.randn((batch, 1, 8, 8), generator=stream, dtype=DTYPE)
                if resolution == 8
                else None
            )
            w = mapping_forward(g_params, gen_config.mapping_depth, z)
            wp = w.unsqueeze(1).expand(-1, 2, -1)
            fake = synthesis_forward(gen_config, g_params, wp, (n0, n1), resolution=resolution)

            real_scores = discriminator_forward_tensor(disc, real)
            fake_scores = discriminator_forward_tensor(disc, fake.detach())
            d_loss = _nonsaturating_d_loss(real_scores, fake_scores)
            d_opt.zero_grad()
            d_loss.backward()
            d_opt.step()

            g_loss = _nonsaturating_g_loss(discriminator_forward_tensor(disc, fake))
            g_opt.zero_grad()
            g_loss.backward()
            g_opt.step()

            record = IterationRecord(
                iteration=done,
                stage_resolution=resolution,
                g_loss=float(g_loss.detach()),
                d_loss=float(d_loss.detach()),
                real_score_mean=float(real_scores.detach().mean()),
                fake_score_mean=float(fake_scores.detach().mean()),
            )
            log.records.append(record)
            if not all(
                np.isfinite(v)
                for v in (record.g_loss, record.d_loss, record.real_score_mean, record.fake_score_mean)
            ):
                log.failed = True
                log.failure = f"non-finite loss at iteration {done} (stage {resolution}x{resolution})"
                break
            done += 1
            if progress_cb is not None and total_iters > 0:
                progress_cb(done / total_iters)
            if (
                sample_dir is not None
                and config.sample_grid_every is not None
                and done % config.sample_grid_every == 0
            ):
                _write_sample_grid(
                    gen_config, g_params, resolution, z_grid,
                    sample_dir / f"samples_{done:06d}_{resolution}x{resolution}.png",
                )

    final = {k: round_through_float32(v.detach()) for k, v in g_params.items()}
    weights = GeneratorWeights(gen_config, final, w_avg=None)
    return weights, log


def best_sample_mse(
    weights: GeneratorWeights, target: FaceTexture, n_samples: int = 256, seed: int = 0
) -> float:
    """Min over seeded latent samples of mean squared error to a target face.

    The memorization probe for single-image training runs: per-channel-value
    MSE of zero-noise renders against the target.
    """
    g = torch.Generator().manual_seed(seed)
    z = torch.randn((n_samples, weights.config.latent_dim), generator=g, dtype=DTYPE)
    with torch.no_grad():
        w = mapping_forward(weights.params, weights.config.mapping_depth, z)
        wp = w.unsqueeze(1).expand(-1, 2, -1)
        imgs = synthesis_forward(weights.config, weights.params, wp, None)
    target_t = torch.from_numpy(np.array(target.pixels)).permute(2, 0, 1)
    mse = ((imgs - target_t) ** 2).mean(dim=(1, 2, 3))
    return float(mse.min())
