"""Text-image scorers: the pluggable distance the edit objective minimizes.

A scorer maps (8x8 face, prompt) to a scalar distance, smaller = better
match, differentiable w.r.t. the image pixels. The bundled analytic scorers
drive the whole test suite; ``EmbeddingScorer`` adapts any pretrained
image/text embedding pair (distance = 1 - cosine similarity) for real
vision-language models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ScorerFailureError
from .textures import FaceTexture

MAX_PROMPT_CHARS = 256


@dataclass(frozen=True)
class TextPrompt:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("prompt must be non-empty")
        if len(self.text) > MAX_PROMPT_CHARS:
            raise ValueError(f"prompt exceeds {MAX_PROMPT_CHARS} characters")


def as_prompt(prompt: "TextPrompt | str") -> TextPrompt:
    return prompt if isinstance(prompt, TextPrompt) else TextPrompt(prompt)


class TextImageScorer:
    """Interface: deterministic, finite, differentiable w.r.t. pixels."""

    name = "scorer"

    def score_tensor(self, image: torch.Tensor, prompt: str) -> torch.Tensor:
        """Distance for an (8,8,3) float64 tensor in [0,1]; scalar tensor out."""
        raise NotImplementedError

    def score(self, face: FaceTexture, prompt: "TextPrompt | str") -> float:
        p = as_prompt(prompt)
        with torch.no_grad():
            value = self.score_tensor(torch.from_numpy(np.array(face.pixels)), p.text)
        return float(value)


class MeanRedScorer(TextImageScorer):
    """1 - mean red channel; the prompt is ignored."""

    name = "mean-red"

    def score_tensor(self, image: torch.Tensor, prompt: str) -> torch.Tensor:
        return 1.0 - image[:, :, 0].mean()


class ColorTargetScorer(TextImageScorer):
    """Mean squared distance of every pixel to a fixed RGB target."""

    def __init__(self, target: tuple[float, float, float]):
        target = tuple(float(c) for c in target)
        if len(target) != 3 or any(not 0.0 <= c <= 1.0 for c in target):
            raise ValueError("color target must be three values in [0,1]")
        self.target = target
        self.name = "color:%g,%g,%g" % target

    def score_tensor(self, image: torch.Tensor, prompt: str) -> torch.Tensor:
        t = torch.as_tensor(self.target, dtype=image.dtype)
        return ((image - t) ** 2).mean()


class BrightnessTargetScorer(TextImageScorer):
    """Squared distance of the global mean to a target brightness."""

    def __init__(self, target: float):
        target = float(target)
        if not 0.0 <= target <= 1.0:
            raise ValueError("brightness target must lie in [0,1]")
        self.target = target
        self.name = "brightness:%g" % target

    def score_tensor(self, image: torch.Tensor, prompt: str) -> torch.Tensor:
        return (image.mean() - self.target) ** 2


class EmbeddingScorer(TextImageScorer):
    """Adapter for any image/text embedding pair.

    ``image_embed`` takes an (S, S, 3) float tensor (the 8x8 face upsampled
    by nearest neighbor) and returns a 1-D embedding; it must be a torch
    computation if the scorer is to be used for gradient-based editing.
    ``text_embed`` takes the prompt string and returns a 1-D embedding
    (cached per prompt). Distance is 1 - cosine similarity.
    """

    def __init__(self, image_embed, text_embed, input_size: int = 224, name: str = "embedding"):
        if input_size < 8:
            raise ValueError("input_size must be >= 8")
        self.image_embed = image_embed
        self.text_embed = text_embed
        self.input_size = int(input_size)
        self.name = name
        self._text_cache: dict[str, torch.Tensor] = {}

    def _upsample(self, image: torch.Tensor) -> torch.Tensor:
        chw = image.permute(2, 0, 1).unsqueeze(0)
        up = F.interpolate(chw, size=(self.input_size, self.input_size), mode="nearest")
        return up[0].permute(1, 2, 0)

    def score_tensor(self, image: torch.Tensor, prompt: str) -> torch.Tensor:
        if prompt not in self._text_cache:
            emb = torch.as_tensor(self.text_embed(prompt), dtype=image.dtype).reshape(-1)
            self._text_cache[prompt] = emb.detach()
        text_emb = self._text_cache[prompt]
        img_emb = self.image_embed(self._upsample(image)).reshape(-1)
        cos = F.cosine_similarity(img_emb.unsqueeze(0), text_emb.unsqueeze(0)).squeeze()
        return 1.0 - cos


def get_scorer(spec: str) -> TextImageScorer:
    """Build a bundled scorer from its config string.

    Accepted forms: ``mean-red``, ``color:R,G,B``, ``brightness:V``.
    """
    name, _, args = spec.partition(":")
    name = name.strip().lower()
    if name == "mean-red":
        return MeanRedScorer()
    if name == "color":
        parts = [p for p in args.split(",") if p.strip()]
        if len(parts) != 3:
            raise ValueError(f"color scorer needs R,G,B values, got {spec!r}")
        return ColorTargetScorer(tuple(float(p) for p in parts))
    if name == "brightness":
        if not args.strip():
            raise ValueError(f"brightness scorer needs a target value, got {spec!r}")
        return BrightnessTargetScorer(float(args))
    raise ValueError(f"unknown scorer {spec!r}")


def call_scorer(scorer: TextImageScorer, image: torch.Tensor, prompt: str) -> torch.Tensor:
    """Invoke a scorer, wrapping foreign failures with context."""
    try:
        value = scorer.score_tensor(image, prompt)
    except Exception as exc:
        raise ScorerFailureError(f"scorer {scorer.name!r} failed: {exc}") from exc
    if not isinstance(value, torch.Tensor) or value.numel() != 1:
        raise ScorerFailureError(
            f"scorer {scorer.name!r} must return a scalar tensor, got {value!r}"
        )
    return value.reshape(())
