"""Project an image into the 2x512 latent space by gradient descent.

The objective is per-pixel squared error against the 8x8 downsample of the
image, normalized by the number of channel-values (N = 192), plus a weighted
channel-statistics loss computed against the *full-resolution* original:
mean absolute difference of per-channel means and population standard
deviations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import NonFiniteLossError
from .generator import GeneratorWeights, ensure_w_avg, map_latent, synthesize, synthesize_tensor, validate_latent
from .textures import FACE_SIZE, FaceTexture, SourceImage, downsample_to_face

N_VALUES = FACE_SIZE * FACE_SIZE * 3  # channel-values in one face


@dataclass(frozen=True)
class InversionConfig:
    lambda_mse: float = 1.0
    lambda_stat: float = 0.5
    steps: int = 500
    learning_rate: float = 0.05
    init: str = "average"  # "average" | "random"
    init_seed: int = 0
    record_trajectory: bool = False

    def __post_init__(self):
        if self.lambda_mse < 0 or self.lambda_stat < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.init not in ("average", "random"):
            raise ValueError(f"init must be 'average' or 'random', got {self.init!r}")


@dataclass(frozen=True)
class ObjectiveTerms:
    total: float
    mse_term: float  # sum of squared channel-value differences (before /N)
    stat_term: float


@dataclass
class InversionResult:
    latent: np.ndarray
    final_loss: float
    mse_term: float
    stat_term: float
    rendered: FaceTexture
    loss_trajectory: list[ObjectiveTerms] | None = None


def image_channel_stats(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and population std over all pixels of an HxWx3 array."""
    flat = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    return flat.mean(axis=0), flat.std(axis=0)


def stat_loss(generated: FaceTexture, original: SourceImage) -> float:
    """(1/3) * sum_c |mu_c(gen) - mu_c(orig)| + |sigma_c(gen) - sigma_c(orig)|.

    The original's statistics are taken over its full resolution, not the
    downsample.
    """
    mu_g, sigma_g = image_channel_stats(generated.pixels)
    mu_o, sigma_o = image_channel_stats(original.pixels)
    return float(np.sum(np.abs(mu_g - mu_o) + np.abs(sigma_g - sigma_o)) / 3.0)


def reconstruction_sse(generated: FaceTexture, target: FaceTexture) -> float:
    """Sum of squared differences over all 192 channel-values."""
    return float(np.sum((generated.pixels - target.pixels) ** 2))


def objective_from_faces(
    generated: FaceTexture,
    target_down: FaceTexture,
    original: SourceImage,
    cfg: InversionConfig,
) -> ObjectiveTerms:
    """Objective arithmetic on already-rendered faces."""
    mse = reconstruction_sse(generated, target_down)
    stat = stat_loss(generated, original)
    total = cfg.lambda_mse * mse / N_VALUES + cfg.lambda_stat * stat
    return ObjectiveTerms(total=total, mse_term=mse, stat_term=stat)


def inversion_objective(
    weights: GeneratorWeights,
    w,
    target_down: FaceTexture,
    original: SourceImage,
    cfg: InversionConfig,
) -> ObjectiveTerms:
    """Objective at latent ``w`` (zero-noise rendering)."""
    rendered = synthesize(weights, w)
    return objective_from_faces(rendered, target_down, original, cfg)


def _objective_tensor(
    weights: GeneratorWeights,
    w_t: torch.Tensor,
    target_t: torch.Tensor,
    mu_o: torch.Tensor,
    sigma_o: torch.Tensor,
    cfg: InversionConfig,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    gen = synthesize_tensor(weights, w_t)
    mse = ((gen - target_t) ** 2).sum()
    flat = gen.reshape(-1, 3)
    mu_g = flat.mean(dim=0)
    # sqrt has an infinite slope at 0: a fully saturated render (constant
    # channel, zero variance) must yield a zero subgradient, not NaN.
    var_g = flat.var(dim=0, unbiased=False)
    safe = torch.where(var_g > 0, var_g, torch.ones_like(var_g))
    sigma_g = torch.where(var_g > 0, torch.sqrt(safe), torch.zeros_like(var_g))
    stat = (torch.abs(mu_g - mu_o) + torch.abs(sigma_g - sigma_o)).sum() / 3.0
    total = cfg.lambda_mse * mse / N_VALUES + cfg.lambda_stat * stat
    return total, mse, stat


def inversion_objective_grad(
    weights: GeneratorWeights,
    w,
    target_down: FaceTexture,
    original: SourceImage,
    cfg: InversionConfig,
) -> tuple[ObjectiveTerms, np.ndarray]:
    """Objective terms plus the analytic gradient w.r.t. the latent."""
    arr = validate_latent(weights, w)
    w_t = torch.from_numpy(arr).clone().requires_grad_(True)
    target_t = torch.from_numpy(np.array(target_down.pixels))
    mu_o, sigma_o = image_channel_stats(original.pixels)
    total, mse, stat = _objective_tensor(
        weights, w_t, target_t, torch.from_numpy(mu_o), torch.from_numpy(sigma_o), cfg
    )
    total.backward()
    terms = ObjectiveTerms(float(total.detach()), float(mse.detach()), float(stat.detach()))
    return terms, w_t.grad.detach().numpy().copy()


def invert(
    weights: GeneratorWeights,
    image: SourceImage,
    cfg: InversionConfig | None = None,
    progress_cb=None,
) -> InversionResult:
    """Minimize the inversion objective over the latent with Adam.

    Starts from the cached average latent or a seeded mapped sample, renders
    with zero noise throughout, and returns the best iterate visited (never
    worse than the start). Raises ``NonFiniteLossError`` if the objective
    degenerates, reporting the step index.
    """
    cfg = cfg or InversionConfig()
    if cfg.init == "average":
        w0 = ensure_w_avg(weights)
    else:
        g = torch.Generator().manual_seed(cfg.init_seed)
        z = torch.randn(weights.latent_dim, generator=g, dtype=torch.float64).numpy()
        w0 = map_latent(weights, z)

    target_down = downsample_to_face(image)
    target_t = torch.from_numpy(np.array(target_down.pixels))
    mu_o, sigma_o = image_channel_stats(image.pixels)
    mu_t, sigma_t = torch.from_numpy(mu_o), torch.from_numpy(sigma_o)

    w_t = torch.from_numpy(np.array(w0, dtype=np.float64)).clone().requires_grad_(True)
    optimizer = torch.optim.Adam([w_t], lr=cfg.learning_rate)

    def evaluate() -> ObjectiveTerms:
        with torch.no_grad():
            total, mse, stat = _objective_tensor(weights, w_t, target_t, mu_t, sigma_t, cfg)
        return ObjectiveTerms(float(total), float(mse), float(stat))

    best_terms = evaluate()
    if not np.isfinite(best_terms.total):
        raise NonFiniteLossError("objective non-finite at initialization", step=0)
    best_w = w_t.detach().numpy().copy()

    trajectory: list[ObjectiveTerms] = []
    for step in range(1, cfg.steps + 1):
        optimizer.zero_grad()
        total, _, _ = _objective_tensor(weights, w_t, target_t, mu_t, sigma_t, cfg)
        if not torch.isfinite(total):
            raise NonFiniteLossError(f"objective non-finite at step {step}", step=step)
        total.backward()
        optimizer.step()

        terms = evaluate()
        if not np.isfinite(terms.total):
            raise NonFiniteLossError(f"objective non-finite at step {step}", step=step)
        trajectory.append(terms)
        if terms.total < best_terms.total:
            best_terms = terms
            best_w = w_t.detach().numpy().copy()
        if progress_cb is not None:
            progress_cb(step / cfg.steps)

    return InversionResult(
        latent=best_w,
        final_loss=best_terms.total,
        mse_term=best_terms.mse_term,
        stat_term=best_terms.stat_term,
        rendered=synthesize(weights, best_w),
        loss_trajectory=trajectory if cfg.record_trajectory else None,
    )


def write_trajectory_jsonl(trajectory: list[ObjectiveTerms], path: str | Path) -> None:
    """One record per step: step index, total, mse_term, stat_term."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, t in enumerate(trajectory, start=1):
            fh.write(
                json.dumps(
                    {"step": i, "total": t.total, "mse_term": t.mse_term, "stat_term": t.stat_term}
                )
                + "\n"
            )
