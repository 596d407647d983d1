"""Miniature style-based generator: mapping network, 2-level synthesis to 8x8.

The synthesis path is deliberately small: a learned 4x4 constant, per-level
style modulation (instance-norm + affine scale/shift driven by one 512-dim
latent row per level), one 3x3 convolution per level, nearest-neighbor
upsampling 4x4 -> 8x8, per-level single-channel noise with learned per-channel
scale, and a (tanh+1)/2 output head. A separate 4x4 output head exists for
the first stage of progressive training.

All math runs in float64. Parameters are kept float32-representable (rounded
through float32 at init/load) so checkpoint round-trips are bit-exact.
Hidden activations use a smooth leaky softplus, which keeps every objective
built on top of ``synthesize`` compatible with finite-difference gradient
checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ShapeMismatchError
from .textures import FaceTexture

DTYPE = torch.float64
ADAIN_EPS = 1e-8
LEVEL_COUNT = 2
BASE_RESOLUTION = 4
OUTPUT_RESOLUTION = 8

# Defaults for the cached average latent.
W_AVG_SAMPLES = 10_000
W_AVG_SEED = 0


@dataclass(frozen=True)
class NoiseSeed:
    """Determinism handle for the per-layer synthesis noise."""

    seed: int

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class GeneratorConfig:
    latent_dim: int = 512
    mapping_depth: int = 4
    channels: int = 32
    level_count: int = field(default=LEVEL_COUNT, init=False)

    def __post_init__(self):
        if self.latent_dim < 1 or self.mapping_depth < 1 or self.channels < 1:
            raise ValueError("latent_dim, mapping_depth, channels must be >= 1")


def param_specs(config: GeneratorConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Canonical parameter order shared by init and serialization."""
    d, c = config.latent_dim, config.channels
    specs: list[tuple[str, tuple[int, ...]]] = []
    for i in range(config.mapping_depth):
        specs.append((f"mapping.{i}.weight", (d, d)))
        specs.append((f"mapping.{i}.bias", (d,)))
    specs += [
        ("const", (c, 4, 4)),
        ("style.0.weight", (2 * c, d)),
        ("style.0.bias", (2 * c,)),
        ("conv.0.weight", (c, c, 3, 3)),
        ("conv.0.bias", (c,)),
        ("noise_scale.0", (c,)),
        ("style.1.weight", (2 * c, d)),
        ("style.1.bias", (2 * c,)),
        ("conv.1.weight", (c, c, 3, 3)),
        ("conv.1.bias", (c,)),
        ("noise_scale.1", (c,)),
        ("to_rgb.4.weight", (3, c, 1, 1)),
        ("to_rgb.4.bias", (3,)),
        ("to_rgb.8.weight", (3, c, 1, 1)),
        ("to_rgb.8.bias", (3,)),
    ]
    return specs


def round_through_float32(t: torch.Tensor) -> torch.Tensor:
    return t.to(torch.float32).to(DTYPE)


class GeneratorWeights:
    """Immutable-by-convention parameter bundle for the generator.

    ``params`` maps canonical names to float64 tensors; ``w_avg`` caches the
    average mapped latent (2 x latent_dim) once computed.
    """

    def __init__(
        self,
        config: GeneratorConfig,
        params: dict[str, torch.Tensor],
        w_avg: np.ndarray | None = None,
    ):
        expected = param_specs(config)
        for name, shape in expected:
            if name not in params:
                raise ShapeMismatchError(f"missing parameter {name}")
            if tuple(params[name].shape) != shape:
                raise ShapeMismatchError(
                    f"parameter {name}: expected shape {shape}, got {tuple(params[name].shape)}"
                )
        self.config = config
        self.params = {name: params[name].detach().to(DTYPE) for name, _ in expected}
        self.w_avg = None if w_avg is None else np.asarray(w_avg, dtype=np.float64)

    @classmethod
    def initialize(cls, config: GeneratorConfig, seed: int = 0) -> "GeneratorWeights":
        """Fresh seeded initialization (noise scales start at zero)."""
        g = torch.Generator().manual_seed(seed)
        d, c = config.latent_dim, config.channels
        params: dict[str, torch.Tensor] = {}

        def randn(shape, std):
            return torch.randn(shape, generator=g, dtype=DTYPE) * std

        for i in range(config.mapping_depth):
            hidden = i < config.mapping_depth - 1
            std = (2.0 / d) ** 0.5 if hidden else (1.0 / d) ** 0.5
            params[f"mapping.{i}.weight"] = randn((d, d), std)
            params[f"mapping.{i}.bias"] = torch.zeros(d, dtype=DTYPE)
        params["const"] = randn((c, 4, 4), 1.0)
        for lvl in range(LEVEL_COUNT):
            params[f"style.{lvl}.weight"] = randn((2 * c, d), (1.0 / d) ** 0.5)
            bias = torch.zeros(2 * c, dtype=DTYPE)
            bias[:c] = 1.0  # scale half of the affine starts at identity
            params[f"style.{lvl}.bias"] = bias
            params[f"conv.{lvl}.weight"] = randn((c, c, 3, 3), (2.0 / (9 * c)) ** 0.5)
            params[f"conv.{lvl}.bias"] = torch.zeros(c, dtype=DTYPE)
            params[f"noise_scale.{lvl}"] = torch.zeros(c, dtype=DTYPE)
        # Output heads start 10x below unit-gain scale so fresh weights render
        # inside tanh's responsive range; adversarial training otherwise drives
        # early samples into saturation, where the pixel gradient dies.
        for res in (4, 8):
            params[f"to_rgb.{res}.weight"] = randn((3, c, 1, 1), 0.1 * (1.0 / c) ** 0.5)
            params[f"to_rgb.{res}.bias"] = torch.zeros(3, dtype=DTYPE)

        params = {k: round_through_float32(v) for k, v in params.items()}
        return cls(config, params)

    @property
    def latent_dim(self) -> int:
        return self.config.latent_dim

    def allclose(self, other: "GeneratorWeights", atol: float = 0.0) -> bool:
        return self.config == other.config and all(
            torch.allclose(self.params[k], other.params[k], rtol=0.0, atol=atol)
            for k, _ in param_specs(self.config)
        )


def leaky_softplus(x: torch.Tensor) -> torch.Tensor:
    """Smooth stand-in for leaky ReLU: 0.2*x + 0.8*softplus(x)."""
    return 0.2 * x + 0.8 * F.softplus(x)


def validate_latent(weights: GeneratorWeights, w) -> np.ndarray:
    arr = np.array(w, dtype=np.float64)  # copy: callers may hold frozen arrays
    if arr.shape != (LEVEL_COUNT, weights.latent_dim):
        raise ShapeMismatchError(
            f"latent must have shape (2, {weights.latent_dim}), got {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise ShapeMismatchError("latent entries must be finite")
    return arr


def mapping_forward(params: dict[str, torch.Tensor], depth: int, z: torch.Tensor) -> torch.Tensor:
    """Mapping network on a (B, latent_dim) batch; final layer is linear."""
    h = z
    for i in range(depth):
        h = h @ params[f"mapping.{i}.weight"].T + params[f"mapping.{i}.bias"]
        if i < depth - 1:
            h = leaky_softplus(h)
    return h


def _adain(x: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
    """Instance-norm x (B,C,H,W), then per-channel scale/shift from style (B,2C)."""
    c = x.shape[1]
    mu = x.mean(dim=(2, 3), keepdim=True)
    var = x.var(dim=(2, 3), unbiased=False, keepdim=True)
    normed = (x - mu) / torch.sqrt(var + ADAIN_EPS)
    scale = style[:, :c].reshape(-1, c, 1, 1)
    shift = style[:, c:].reshape(-1, c, 1, 1)
    return normed * scale + shift


def _level(
    params: dict[str, torch.Tensor],
    lvl: int,
    x: torch.Tensor,
    w_row: torch.Tensor,
    noise: torch.Tensor | None,
) -> torch.Tensor:
    if noise is not None:
        x = x + noise * params[f"noise_scale.{lvl}"].reshape(1, -1, 1, 1)
    style = w_row @ params[f"style.{lvl}.weight"].T + params[f"style.{lvl}.bias"]
    x = _adain(x, style)
    x = F.conv2d(x, params[f"conv.{lvl}.weight"], params[f"conv.{lvl}.bias"], padding=1)
    return leaky_softplus(x)


def _to_rgb(params: dict[str, torch.Tensor], res: int, x: torch.Tensor) -> torch.Tensor:
    y = F.conv2d(x, params[f"to_rgb.{res}.weight"], params[f"to_rgb.{res}.bias"])
    return (torch.tanh(y) + 1.0) / 2.0


def synthesis_forward(
    config: GeneratorConfig,
    params: dict[str, torch.Tensor],
    w: torch.Tensor,
    noise: tuple[torch.Tensor, torch.Tensor] | None = None,
    resolution: int = OUTPUT_RESOLUTION,
) -> torch.Tensor:
    """Synthesis on a (B, 2, latent_dim) batch -> (B, 3, res, res) in [0,1].

    ``noise`` is a pair of (B,1,4,4) and (B,1,8,8) tensors or None for the
    zero-noise setting. ``resolution`` 4 uses the stage-1 output head.
    """
    if w.ndim != 3 or w.shape[1:] != (LEVEL_COUNT, config.latent_dim):
        raise ShapeMismatchError(
            f"latent batch must be (B, 2, {config.latent_dim}), got {tuple(w.shape)}"
        )
    if resolution not in (4, OUTPUT_RESOLUTION):
        raise ValueError(f"resolution must be 4 or 8, got {resolution}")
    batch = w.shape[0]
    x = params["const"].unsqueeze(0).expand(batch, -1, -1, -1)
    x = _level(params, 0, x, w[:, 0, :], None if noise is None else noise[0])
    if resolution == 4:
        return _to_rgb(params, 4, x)
    x = F.interpolate(x, scale_factor=2, mode="nearest")
    x = _level(params, 1, x, w[:, 1, :], None if noise is None else noise[1])
    return _to_rgb(params, 8, x)


def draw_noise(
    seed: NoiseSeed | int, batch: int = 1
) -> tuple[torch.Tensor, torch.Tensor]:
    """Seeded per-level noise images: (B,1,4,4) and (B,1,8,8)."""
    s = seed.seed if isinstance(seed, NoiseSeed) else int(seed)
    g = torch.Generator().manual_seed(s)
    n0 = torch.randn((batch, 1, 4, 4), generator=g, dtype=DTYPE)
    n1 = torch.randn((batch, 1, 8, 8), generator=g, dtype=DTYPE)
    return n0, n1


def map_latent(weights: GeneratorWeights, z) -> np.ndarray:
    """Map an input latent z (latent_dim,) to W+ (both rows broadcast)."""
    arr = np.array(z, dtype=np.float64)
    if arr.shape != (weights.latent_dim,):
        raise ShapeMismatchError(
            f"z must have shape ({weights.latent_dim},), got {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise ShapeMismatchError("z entries must be finite")
    with torch.no_grad():
        w = mapping_forward(
            weights.params, weights.config.mapping_depth, torch.from_numpy(arr).unsqueeze(0)
        )[0]
    return np.repeat(w.numpy()[None, :], LEVEL_COUNT, axis=0)


def synthesize_tensor(
    weights: GeneratorWeights,
    w: torch.Tensor,
    noise: NoiseSeed | int | None = None,
) -> torch.Tensor:
    """Differentiable core: latent tensor (2, latent_dim) -> (8, 8, 3) in [0,1].

    Gradients flow to ``w`` when it requires grad; noise is fixed by seed
    (or zero), so the output is a deterministic function of ``w``.
    """
    if w.shape != (LEVEL_COUNT, weights.latent_dim):
        raise ShapeMismatchError(
            f"latent must have shape (2, {weights.latent_dim}), got {tuple(w.shape)}"
        )
    noise_t = None if noise is None else draw_noise(noise, batch=1)
    out = synthesis_forward(weights.config, weights.params, w.unsqueeze(0), noise_t)
    return out[0].permute(1, 2, 0)


def synthesize(
    weights: GeneratorWeights, w, noise: NoiseSeed | int | None = None
) -> FaceTexture:
    """Render a latent to an 8x8 face. ``noise=None`` means zero noise."""
    arr = validate_latent(weights, w)
    with torch.no_grad():
        out = synthesize_tensor(weights, torch.from_numpy(arr), noise)
    return FaceTexture(np.clip(out.numpy(), 0.0, 1.0))


def average_latent(
    weights: GeneratorWeights, n_samples: int, seed: NoiseSeed | int = W_AVG_SEED
) -> np.ndarray:
    """Mean mapped latent over n_samples standard-normal draws (seeded)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    s = seed.seed if isinstance(seed, NoiseSeed) else int(seed)
    g = torch.Generator().manual_seed(s)
    total = torch.zeros(weights.latent_dim, dtype=DTYPE)
    remaining = n_samples
    with torch.no_grad():
        while remaining > 0:
            chunk = min(remaining, 1024)
            z = torch.randn((chunk, weights.latent_dim), generator=g, dtype=DTYPE)
            total += mapping_forward(weights.params, weights.config.mapping_depth, z).sum(dim=0)
            remaining -= chunk
    mean = (total / n_samples).numpy()
    return np.repeat(mean[None, :], LEVEL_COUNT, axis=0)


def ensure_w_avg(weights: GeneratorWeights) -> np.ndarray:
    """Cached average latent, computed on first use with the default budget."""
    if weights.w_avg is None:
        weights.w_avg = average_latent(weights, W_AVG_SAMPLES, W_AVG_SEED)
    return weights.w_avg


def sample_random_latent(
    weights: GeneratorWeights, truncation: float, seed: NoiseSeed | int
) -> np.ndarray:
    """Seeded W+ sample, blended toward the average latent.

    truncation=1 returns map_latent(z) unchanged; truncation=0 returns the
    cached average exactly.
    """
    if not 0.0 <= truncation <= 1.0:
        raise ValueError("truncation must lie in [0,1]")
    w_avg = ensure_w_avg(weights)
    if truncation == 0.0:
        return w_avg.copy()
    s = seed.seed if isinstance(seed, NoiseSeed) else int(seed)
    g = torch.Generator().manual_seed(s)
    z = torch.randn(weights.latent_dim, generator=g, dtype=DTYPE).numpy()
    w = map_latent(weights, z)
    if truncation == 1.0:
        return w
    return w_avg + truncation * (w - w_avg)
