"""Generator forward passes, latent utilities, and checkpoint files."""

import numpy as np
import pytest
import torch

from facecraft import (
    ChecksumError,
    FaceTexture,
    GeneratorConfig,
    GeneratorWeights,
    NoiseSeed,
    ShapeMismatchError,
    VersionMismatchError,
    average_latent,
    ensure_w_avg,
    load_latent,
    load_weights,
    map_latent,
    sample_random_latent,
    save_latent,
    save_weights,
    synthesize,
)
from facecraft.generator import (
    leaky_softplus,
    mapping_forward,
    param_specs,
    round_through_float32,
    synthesize_tensor,
)

from conftest import TINY


def seeded_latent(weights: GeneratorWeights, seed: int) -> np.ndarray:
    z = np.random.default_rng(seed).standard_normal(weights.latent_dim)
    return map_latent(weights, z)


# --- configuration and parameter bookkeeping ---


def test_config_validation():
    GeneratorConfig(latent_dim=4, mapping_depth=1, channels=2)
    with pytest.raises(ValueError):
        GeneratorConfig(latent_dim=0)
    with pytest.raises(ValueError):
        GeneratorConfig(mapping_depth=0)


def test_param_specs_cover_initialized_weights(tiny_weights):
    specs = param_specs(tiny_weights.config)
    assert [name for name, _ in specs] == list(tiny_weights.params.keys())
    for name, shape in specs:
        assert tuple(tiny_weights.params[name].shape) == shape


def test_weights_reject_missing_or_misshapen_params(tiny_config, tiny_weights):
    params = dict(tiny_weights.params)
    del params["const"]
    with pytest.raises(ShapeMismatchError):
        GeneratorWeights(tiny_config, params)
    params = dict(tiny_weights.params)
    params["const"] = torch.zeros(2, 2)
    with pytest.raises(ShapeMismatchError):
        GeneratorWeights(tiny_config, params)


def test_initialization_is_seeded_and_float32_exact():
    a = GeneratorWeights.initialize(TINY, seed=7)
    b = GeneratorWeights.initialize(TINY, seed=7)
    c = GeneratorWeights.initialize(TINY, seed=8)
    assert a.allclose(b)
    assert not a.allclose(c)
    for t in a.params.values():
        assert torch.equal(t, round_through_float32(t))


# --- mapping and synthesis ---


def test_map_latent_broadcasts_and_is_deterministic(tiny_weights):
    z = np.random.default_rng(3).standard_normal(tiny_weights.latent_dim)
    w1 = map_latent(tiny_weights, z)
    w2 = map_latent(tiny_weights, z)
    assert np.array_equal(w1, w2)
    assert w1.shape == (2, tiny_weights.latent_dim)
    assert np.array_equal(w1[0], w1[1])


def test_map_latent_rejects_bad_shapes(tiny_weights):
    with pytest.raises(ShapeMismatchError):
        map_latent(tiny_weights, np.zeros(tiny_weights.latent_dim + 1))
    with pytest.raises(ShapeMismatchError):
        map_latent(tiny_weights, np.full(tiny_weights.latent_dim, np.nan))


def test_single_layer_mapping_matches_affine_oracle():
    cfg = GeneratorConfig(latent_dim=6, mapping_depth=1, channels=4)
    weights = GeneratorWeights.initialize(cfg, seed=2)
    W = weights.params["mapping.0.weight"].numpy()
    b = weights.params["mapping.0.bias"].numpy()
    z = np.random.default_rng(0).standard_normal(6)
    w = map_latent(weights, z)
    # Oracle: a 1-layer mapping is exactly affine, w = Wz + b.
    assert np.abs(w[0] - (W @ z + b)).max() < 1e-12
    # z = 0 isolates the bias composition.
    assert np.abs(map_latent(weights, np.zeros(6))[0] - b).max() < 1e-12


def test_deep_mapping_applies_activation_between_layers(tiny_weights):
    z = np.random.default_rng(5).standard_normal(tiny_weights.latent_dim)
    p = tiny_weights.params
    h = torch.from_numpy(z).unsqueeze(0)
    h = leaky_softplus(h @ p["mapping.0.weight"].T + p["mapping.0.bias"])
    h = h @ p["mapping.1.weight"].T + p["mapping.1.bias"]
    assert np.abs(map_latent(tiny_weights, z)[0] - h[0].numpy()).max() < 1e-12


def test_synthesize_is_deterministic_with_valid_range(tiny_weights):
    w = seeded_latent(tiny_weights, 0)
    f1 = synthesize(tiny_weights, w)
    f2 = synthesize(tiny_weights, w)
    assert isinstance(f1, FaceTexture)
    assert f1.pixels.shape == (8, 8, 3)
    assert np.array_equal(f1.pixels, f2.pixels)
    assert f1.pixels.min() >= 0.0 and f1.pixels.max() <= 1.0


def test_synthesize_rejects_wrong_latent_shape(tiny_weights):
    with pytest.raises(ShapeMismatchError):
        synthesize(tiny_weights, np.zeros((3, tiny_weights.latent_dim)))
    with pytest.raises(ShapeMismatchError):
        synthesize(tiny_weights, np.zeros((2, tiny_weights.latent_dim + 1)))


def test_rows_act_on_separate_levels(tiny_weights):
    # Perturbing row 1 must change the output; rows are not interchangeable.
    w = seeded_latent(tiny_weights, 1)
    w2 = np.array(w)
    w2[1] += 0.5
    a = synthesize(tiny_weights, w).pixels
    b = synthesize(tiny_weights, w2).pixels
    assert not np.array_equal(a, b)


def test_noise_seed_changes_output_only_with_nonzero_scales(tiny_config):
    weights = GeneratorWeights.initialize(tiny_config, seed=0)
    w = seeded_latent(weights, 2)
    # Freshly initialized noise scales are zero, so noise has no effect.
    assert np.array_equal(
        synthesize(weights, w, noise=NoiseSeed(1)).pixels,
        synthesize(weights, w).pixels,
    )
    params = {k: v.clone() for k, v in weights.params.items()}
    params["noise_scale.0"] += 0.5
    params["noise_scale.1"] += 0.5
    noisy = GeneratorWeights(tiny_config, params)
    assert not np.array_equal(
        synthesize(noisy, w, noise=NoiseSeed(1)).pixels,
        synthesize(noisy, w).pixels,
    )
    assert np.array_equal(
        synthesize(noisy, w, noise=NoiseSeed(1)).pixels,
        synthesize(noisy, w, noise=NoiseSeed(1)).pixels,
    )


def test_synthesize_gradient_matches_finite_differences(tiny_weights):
    """d(mean pixel)/dw against central differences, h = 1e-3."""
    w0 = seeded_latent(tiny_weights, 4)

    def f(arr: np.ndarray) -> float:
        return float(synthesize(tiny_weights, arr).pixels.mean())

    w_t = torch.from_numpy(np.array(w0)).requires_grad_(True)
    synthesize_tensor(tiny_weights, w_t).mean().backward()
    analytic = w_t.grad.numpy()

    h = 1e-3
    fd = np.zeros_like(w0)
    for idx in np.ndindex(w0.shape):
        e = np.zeros_like(w0)
        e[idx] = h
        fd[idx] = (f(w0 + e) - f(w0 - e)) / (2 * h)
    rel = np.linalg.norm(analytic - fd) / np.linalg.norm(fd)
    assert rel < 1e-4


# --- latent-space utilities ---


def test_average_latent_single_sample_equals_map(tiny_weights):
    w_avg = average_latent(tiny_weights, n_samples=1, seed=9)
    g = torch.Generator().manual_seed(9)
    z = torch.randn(tiny_weights.latent_dim, generator=g, dtype=torch.float64).numpy()
    assert np.abs(w_avg - map_latent(tiny_weights, z)).max() < 1e-12


def test_average_latent_concentrates_for_linear_mapping():
    cfg = GeneratorConfig(latent_dim=8, mapping_depth=1, channels=4)
    weights = GeneratorWeights.initialize(cfg, seed=3)
    a = average_latent(weights, n_samples=10_000, seed=0)
    b = average_latent(weights, n_samples=10_000, seed=1)
    assert np.abs(a - b).max() < 0.1


def test_average_latent_lln_for_zero_bias_linear_mapping():
    cfg = GeneratorConfig(latent_dim=8, mapping_depth=1, channels=4)
    base = GeneratorWeights.initialize(cfg, seed=3)
    params = {k: v.clone() for k, v in base.params.items()}
    params["mapping.0.bias"] = torch.zeros(8, dtype=torch.float64)
    weights = GeneratorWeights(cfg, params)
    w_avg = average_latent(weights, n_samples=100_000, seed=0)
    assert np.abs(w_avg).max() < 0.05


def test_ensure_w_avg_caches():
    weights = GeneratorWeights.initialize(TINY, seed=11)
    assert weights.w_avg is None
    first = ensure_w_avg(weights)
    assert weights.w_avg is not None
    assert ensure_w_avg(weights) is weights.w_avg
    assert np.array_equal(first, weights.w_avg)


def test_truncation_endpoints_and_midpoint():
    weights = GeneratorWeights.initialize(TINY, seed=12)
    w_avg = ensure_w_avg(weights)
    assert np.array_equal(sample_random_latent(weights, 0.0, seed=5), w_avg)

    g = torch.Generator().manual_seed(5)
    z = torch.randn(weights.latent_dim, generator=g, dtype=torch.float64).numpy()
    w_full = map_latent(weights, z)
    assert np.array_equal(sample_random_latent(weights, 1.0, seed=5), w_full)

    mid = sample_random_latent(weights, 0.5, seed=5)
    assert np.abs(mid - (w_avg + 0.5 * (w_full - w_avg))).max() < 1e-12


def test_truncation_bounds_checked(tiny_weights):
    with pytest.raises(ValueError):
        sample_random_latent(tiny_weights, -0.1, seed=0)
    with pytest.raises(ValueError):
        sample_random_latent(tiny_weights, 1.1, seed=0)


def test_noise_seed_validation():
    NoiseSeed(0)
    NoiseSeed(2**64 - 1)
    with pytest.raises(ValueError):
        NoiseSeed(-1)
    with pytest.raises(ValueError):
        NoiseSeed(2**64)


# --- checkpoint files ---


def test_weights_round_trip_bit_exact(tmp_path):
    weights = GeneratorWeights.initialize(TINY, seed=21)
    ensure_w_avg(weights)
    path = tmp_path / "weights.fcgw"
    save_weights(weights, path)
    loaded = load_weights(path)
    assert loaded.config == weights.config
    for name, _ in param_specs(TINY):
        assert torch.equal(loaded.params[name], weights.params[name])
    # The cached average latent survives, rounded through the float32 blob.
    expected_avg = np.asarray(weights.w_avg, dtype=np.float32).astype(np.float64)
    assert np.array_equal(loaded.w_avg, expected_avg)


def test_weights_file_is_byte_stable(tmp_path):
    weights = GeneratorWeights.initialize(TINY, seed=21)
    p1, p2 = tmp_path / "a.fcgw", tmp_path / "b.fcgw"
    save_weights(weights, p1)
    save_weights(weights, p2)
    assert p1.read_bytes() == p2.read_bytes()
    # Save-load-save is a fixed point: the blob is float32 at rest.
    save_weights(load_weights(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_weights_wrong_magic(tmp_path):
    weights = GeneratorWeights.initialize(TINY, seed=0)
    path = tmp_path / "weights.fcgw"
    save_weights(weights, path)
    data = bytearray(path.read_bytes())
    data[:4] = b"NOPE"
    path.write_bytes(bytes(data))
    with pytest.raises(VersionMismatchError):
        load_weights(path)


def test_load_weights_truncated(tmp_path):
    weights = GeneratorWeights.initialize(TINY, seed=0)
    path = tmp_path / "weights.fcgw"
    save_weights(weights, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(ChecksumError):
        load_weights(path)
    path.write_bytes(data[:3])
    with pytest.raises(ChecksumError):
        load_weights(path)


def test_load_weights_corrupted_payload(tmp_path):
    weights = GeneratorWeights.initialize(TINY, seed=0)
    path = tmp_path / "weights.fcgw"
    save_weights(weights, path)
    data = bytearray(path.read_bytes())
    data[len(data) // 2] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(ChecksumError):
        load_weights(path)


def test_load_weights_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_weights(tmp_path / "absent.fcgw")


def test_latent_round_trip_and_errors(tmp_path):
    w = np.random.default_rng(0).standard_normal((2, 16)).astype(np.float32)
    path = tmp_path / "latent.fclt"
    save_latent(w.astype(np.float64), path)
    loaded = load_latent(path)
    assert np.array_equal(loaded, w.astype(np.float64))

    with pytest.raises(ValueError):
        save_latent(np.zeros((3, 16)), tmp_path / "bad.fclt")

    weights_path = tmp_path / "weights.fcgw"
    save_weights(GeneratorWeights.initialize(TINY, seed=0), weights_path)
    with pytest.raises(VersionMismatchError):
        load_latent(weights_path)  # wrong magic for a latent file
