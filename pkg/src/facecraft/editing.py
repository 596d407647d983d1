"""Text-guided latent optimization under an L2 leash.

Minimizes scorer distance plus ``lambda_l2 * ||w - w_star||_2`` (unsquared,
as a plain Euclidean norm over all 1024 latent components; its subgradient
at zero displacement is defined as 0). The source latent ``w_star`` stays
fixed; optimization starts there and returns the best iterate visited.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import NonFiniteLossError
from .generator import (
    GeneratorWeights,
    ensure_w_avg,
    sample_random_latent,
    synthesize,
    synthesize_tensor,
    validate_latent,
)
from .inversion import ObjectiveTerms
from .scorers import TextImageScorer, as_prompt, call_scorer
from .textures import FaceTexture


@dataclass(frozen=True)
class EditConfig:
    lambda_l2: float = 0.008
    steps: int = 100
    learning_rate: float = 0.1
    seed: int = 0
    record_trajectory: bool = False

    def __post_init__(self):
        if self.lambda_l2 < 0:
            raise ValueError("lambda_l2 must be nonnegative")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class EditTerms:
    total: float
    clip_term: float
    l2_term: float


@dataclass
class EditResult:
    latent: np.ndarray
    total: float
    clip_term: float
    l2_term: float
    rendered: FaceTexture
    trajectory: list[EditTerms] | None = None


def _leash_norm(delta: torch.Tensor) -> torch.Tensor:
    """||delta||_2 with subgradient 0 at delta = 0 (both branches kept
    NaN-free so autograd stays clean)."""
    s = (delta**2).sum()
    safe = torch.where(s > 0, s, torch.ones_like(s))
    return torch.where(s > 0, torch.sqrt(safe), torch.zeros_like(s))


def _edit_terms_tensor(
    weights: GeneratorWeights,
    w_fin_t: torch.Tensor,
    w_star_t: torch.Tensor,
    prompt_text: str,
    scorer: TextImageScorer,
    lambda_l2: float,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    image = synthesize_tensor(weights, w_fin_t)
    clip_term = call_scorer(scorer, image, prompt_text)
    l2_term = _leash_norm(w_fin_t - w_star_t)
    total = clip_term + lambda_l2 * l2_term
    return total, clip_term, l2_term


def edit_objective(
    weights: GeneratorWeights,
    w_fin,
    w_star,
    prompt,
    scorer: TextImageScorer,
    lambda_l2: float,
) -> EditTerms:
    """Objective at ``w_fin``: scorer distance on the zero-noise render plus
    the weighted L2 displacement from ``w_star``."""
    p = as_prompt(prompt)
    fin = torch.from_numpy(validate_latent(weights, w_fin))
    star = torch.from_numpy(validate_latent(weights, w_star))
    with torch.no_grad():
        total, clip_term, l2_term = _edit_terms_tensor(
            weights, fin, star, p.text, scorer, lambda_l2
        )
    return EditTerms(float(total), float(clip_term), float(l2_term))


def edit_objective_grad(
    weights: GeneratorWeights,
    w_fin,
    w_star,
    prompt,
    scorer: TextImageScorer,
    lambda_l2: float,
) -> tuple[EditTerms, np.ndarray]:
    """Objective terms plus the analytic gradient w.r.t. ``w_fin``."""
    p = as_prompt(prompt)
    fin = torch.from_numpy(validate_latent(weights, w_fin)).clone().requires_grad_(True)
    star = torch.from_numpy(validate_latent(weights, w_star))
    total, clip_term, l2_term = _edit_terms_tensor(weights, fin, star, p.text, scorer, lambda_l2)
    total.backward()
    terms = EditTerms(
        float(total.detach()), float(clip_term.detach()), float(l2_term.detach())
    )
    return terms, fin.grad.detach().numpy().copy()


def edit(
    weights: GeneratorWeights,
    w_star,
    prompt,
    scorer: TextImageScorer,
    cfg: EditConfig | None = None,
    progress_cb=None,
) -> EditResult:
    """Gradient descent on the edit objective, starting at ``w_star``.

    Deterministic given the config seed, zero-noise rendering throughout,
    best-so-far return.
    """
    cfg = cfg or EditConfig()
    p = as_prompt(prompt)
    star = torch.from_numpy(validate_latent(weights, w_star))
    w_t = star.clone().requires_grad_(True)
    optimizer = torch.optim.Adam([w_t], lr=cfg.learning_rate)

    def evaluate() -> EditTerms:
        with torch.no_grad():
            total, clip_term, l2_term = _edit_terms_tensor(
                weights, w_t, star, p.text, scorer, cfg.lambda_l2
            )
        return EditTerms(float(total), float(clip_term), float(l2_term))

    best = evaluate()
    if not np.isfinite(best.total):
        raise NonFiniteLossError("edit objective non-finite at initialization", step=0)
    best_w = w_t.detach().numpy().copy()

    trajectory: list[EditTerms] = []
    for step in range(1, cfg.steps + 1):
        optimizer.zero_grad()
        total, _, _ = _edit_terms_tensor(weights, w_t, star, p.text, scorer, cfg.lambda_l2)
        if not torch.isfinite(total):
            raise NonFiniteLossError(f"edit objective non-finite at step {step}", step=step)
        total.backward()
        optimizer.step()

        terms = evaluate()
        if not np.isfinite(terms.total):
            raise NonFiniteLossError(f"edit objective non-finite at step {step}", step=step)
        trajectory.append(terms)
        if terms.total < best.total:
            best = terms
            best_w = w_t.detach().numpy().copy()
        if progress_cb is not None:
            progress_cb(step / cfg.steps)

    return EditResult(
        latent=best_w,
        total=best.total,
        clip_term=best.clip_term,
        l2_term=best.l2_term,
        rendered=synthesize(weights, best_w),
        trajectory=trajectory if cfg.record_trajectory else None,
    )


def resolve_latent_source(weights: GeneratorWeights, source) -> np.ndarray:
    """Resolve an edit source to a concrete latent.

    Accepts "average", ("random", seed), or an explicit (2, latent_dim)
    latent (passed through unchanged).
    """
    if isinstance(source, str):
        if source == "average":
            return ensure_w_avg(weights).copy()
        raise ValueError(f"unknown latent source {source!r}")
    if isinstance(source, tuple) and len(source) == 2 and source[0] == "random":
        return sample_random_latent(weights, truncation=1.0, seed=int(source[1]))
    return validate_latent(weights, source)


def edit_from_source(
    weights: GeneratorWeights,
    source,
    prompt,
    scorer: TextImageScorer,
    cfg: EditConfig | None = None,
    progress_cb=None,
) -> EditResult:
    """Resolve the source latent, then delegate to ``edit`` with it fixed."""
    w_star = resolve_latent_source(weights, source)
    return edit(weights, w_star, prompt, scorer, cfg, progress_cb=progress_cb)
