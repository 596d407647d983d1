"""Two-stage adversarial training: determinism, stage handoff, failure paths."""

import json

import numpy as np
import pytest
import torch

from facecraft import (
    EmptyCorpusError,
    FaceTexture,
    GeneratorConfig,
    GeneratorWeights,
    ShapeMismatchError,
    TrainConfig,
    best_sample_mse,
    load_corpus,
    save_face,
    save_weights,
    train,
)
from facecraft.training import (
    Discriminator,
    IterationRecord,
    TrainLog,
    discriminator_forward,
    discriminator_forward_tensor,
)

from conftest import TINY, random_face_array


@pytest.fixture()
def corpus_dir(tmp_path, rng):
    d = tmp_path / "corpus"
    d.mkdir()
    for i in range(6):
        save_face(FaceTexture(random_face_array(rng)), d / f"{i}.png")
    return d


def tiny_train_config(**overrides) -> TrainConfig:
    base = dict(
        generator=TINY,
        stage1_iterations=8,
        stage2_iterations=8,
        stage1_batch=4,
        stage2_batch=4,
        seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


# --- config and log plumbing ---


def test_train_config_validation():
    tiny_train_config()
    with pytest.raises(ValueError):
        tiny_train_config(stage1_iterations=-1)
    with pytest.raises(ValueError):
        tiny_train_config(stage1_batch=0)
    with pytest.raises(ValueError):
        tiny_train_config(g_lr=0.0)
    with pytest.raises(ValueError):
        tiny_train_config(sample_grid_every=0)


def test_full_scale_preset():
    cfg = TrainConfig.full_scale()
    assert (cfg.stage1_iterations, cfg.stage2_iterations) == (10_000, 10_000)
    assert (cfg.stage1_batch, cfg.stage2_batch) == (1024, 512)
    smaller = TrainConfig.full_scale(stage2_batch=64)
    assert smaller.stage2_batch == 64
    assert smaller.stage1_batch == 1024


def test_train_log_jsonl(tmp_path):
    log = TrainLog(
        records=[
            IterationRecord(0, 4, 0.5, 0.7, 0.1, -0.1),
            IterationRecord(1, 8, 0.4, 0.6, 0.2, -0.2),
        ],
        failed=True,
        failure="non-finite loss at iteration 1 (stage 8x8)",
    )
    path = tmp_path / "log.jsonl"
    log.write_jsonl(path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert json.loads(lines[0])["stage_resolution"] == 4
    assert json.loads(lines[2])["failed"] is True


def test_load_corpus(corpus_dir, tmp_path):
    corpus = load_corpus(corpus_dir)
    assert corpus.shape == (6, 8, 8, 3)
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(EmptyCorpusError):
        load_corpus(empty)
    with pytest.raises(OSError):
        load_corpus(tmp_path / "missing")


# --- discriminator ---


def test_discriminator_deterministic_and_batched(rng):
    disc = Discriminator.initialize(channels=8, resolution=8, seed=0)
    face = FaceTexture(random_face_array(rng))
    assert discriminator_forward(disc, face) == discriminator_forward(disc, face)

    batch = rng.random((5, 8, 8, 3))
    scores = discriminator_forward(disc, batch)
    assert scores.shape == (5,)
    for i in range(5):
        assert scores[i] == pytest.approx(discriminator_forward(disc, batch[i]), abs=1e-12)


def test_discriminator_rejects_wrong_shapes(rng):
    disc = Discriminator.initialize(channels=8, resolution=8, seed=0)
    with pytest.raises(ShapeMismatchError):
        discriminator_forward(disc, rng.random((4, 4, 3)))
    with pytest.raises(ShapeMismatchError):
        discriminator_forward(disc, rng.random((5, 8, 8, 4)))


def test_discriminator_gradient_matches_finite_differences(rng):
    disc = Discriminator.initialize(channels=4, resolution=4, seed=1)
    x0 = rng.random((1, 3, 4, 4))

    x_t = torch.from_numpy(np.array(x0)).requires_grad_(True)
    discriminator_forward_tensor(disc, x_t).sum().backward()
    analytic = x_t.grad.numpy()

    h = 1e-3
    fd = np.zeros_like(x0)
    for idx in np.ndindex(x0.shape):
        e = np.zeros_like(x0)
        e[idx] = h
        up = discriminator_forward_tensor(disc, torch.from_numpy(x0 + e)).sum().item()
        down = discriminator_forward_tensor(disc, torch.from_numpy(x0 - e)).sum().item()
        fd[idx] = (up - down) / (2 * h)
    rel = np.linalg.norm(analytic - fd) / np.linalg.norm(fd)
    assert rel < 1e-4


# --- the training loop ---


def test_noop_training_returns_initial_weights(corpus_dir):
    cfg = tiny_train_config(stage1_iterations=0, stage2_iterations=0, seed=5)
    weights, log = train(corpus_dir, cfg)
    fresh = GeneratorWeights.initialize(TINY, seed=5)
    assert weights.allclose(fresh)
    assert log.records == []
    assert not log.failed


def test_warm_start_identity(corpus_dir, tmp_path):
    start = GeneratorWeights.initialize(TINY, seed=9)
    ckpt = tmp_path / "start.fcgw"
    save_weights(start, ckpt)
    cfg = tiny_train_config(
        stage1_iterations=0, stage2_iterations=0, warm_start=str(ckpt)
    )
    weights, _ = train(corpus_dir, cfg)
    assert weights.allclose(start)


def test_training_is_deterministic(corpus_dir):
    cfg = tiny_train_config()
    w1, log1 = train(corpus_dir, cfg)
    w2, log2 = train(corpus_dir, cfg)
    for name in w1.params:
        assert torch.equal(w1.params[name], w2.params[name])
    assert log1.records == log2.records


def test_training_seed_changes_outcome(corpus_dir):
    w1, _ = train(corpus_dir, tiny_train_config(seed=0))
    w2, _ = train(corpus_dir, tiny_train_config(seed=1))
    assert not w1.allclose(w2)


def test_training_log_covers_both_stages(corpus_dir):
    cfg = tiny_train_config(stage1_iterations=5, stage2_iterations=7)
    weights, log = train(corpus_dir, cfg)
    assert len(log.records) == 12
    assert [r.stage_resolution for r in log.records] == [4] * 5 + [8] * 7
    assert [r.iteration for r in log.records] == list(range(12))
    assert all(
        np.isfinite([r.g_loss, r.d_loss, r.real_score_mean, r.fake_score_mean]).all()
        for r in log.records
    )


def test_stage_two_starts_from_stage_one_weights(corpus_dir):
    # Same seed, stage-1 only vs both stages: the 4x4 output head receives no
    # stage-2 gradient, so its parameters survive stage 2 bit-for-bit. A
    # reinitialization between stages would break that equality.
    stage1_only, _ = train(corpus_dir, tiny_train_config(stage2_iterations=0))
    both, _ = train(corpus_dir, tiny_train_config())
    assert torch.equal(stage1_only.params["to_rgb.4.weight"], both.params["to_rgb.4.weight"])
    assert torch.equal(stage1_only.params["to_rgb.4.bias"], both.params["to_rgb.4.bias"])
    # Shared synthesis parameters do keep training in stage 2.
    assert not torch.equal(stage1_only.params["conv.0.weight"], both.params["conv.0.weight"])


def test_training_weights_are_float32_at_rest(corpus_dir, tmp_path):
    from facecraft import load_weights
    from facecraft.generator import round_through_float32

    weights, _ = train(corpus_dir, tiny_train_config())
    for t in weights.params.values():
        assert torch.equal(t, round_through_float32(t))
    path = tmp_path / "trained.fcgw"
    save_weights(weights, path)
    reloaded = load_weights(path)
    for name in weights.params:
        assert torch.equal(weights.params[name], reloaded.params[name])


def test_single_image_memorization_reduces_best_mse(tmp_path):
    d = tmp_path / "corpus"
    d.mkdir()
    # Dark target: fresh weights render near mid-gray, so a 0.5 target would
    # start almost converged and leave no headroom to measure a decrease.
    target = FaceTexture(np.full((8, 8, 3), 0.25))
    save_face(target, d / "dark.png")

    cfg = tiny_train_config(stage1_iterations=150, stage2_iterations=150, stage1_batch=8, stage2_batch=8)
    before = best_sample_mse(GeneratorWeights.initialize(TINY, seed=0), target, n_samples=64)
    weights, log = train(d, cfg)
    after = best_sample_mse(weights, target, n_samples=64)
    assert not log.failed
    assert after < before


def test_training_failure_marker_on_overflow(corpus_dir):
    # An absurd learning rate overflows the discriminator within a few steps;
    # the loop must stop, mark the log, and still return partial results.
    cfg = tiny_train_config(d_lr=1e300, g_lr=1e300, stage1_iterations=50)
    weights, log = train(corpus_dir, cfg)
    assert log.failed
    assert log.failure is not None
    assert "non-finite" in log.failure
    assert len(log.records) < 100
    assert isinstance(weights, GeneratorWeights)


def test_training_empty_corpus(tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    with pytest.raises(EmptyCorpusError):
        train(empty, tiny_train_config())


def test_training_progress_callback(corpus_dir):
    seen = []
    train(corpus_dir, tiny_train_config(stage1_iterations=2, stage2_iterations=2), progress_cb=seen.append)
    assert seen == [0.25, 0.5, 0.75, 1.0]


def test_training_writes_sample_grids(corpus_dir, tmp_path):
    sample_dir = tmp_path / "samples"
    cfg = tiny_train_config(
        stage1_iterations=4,
        stage2_iterations=4,
        sample_grid_every=4,
        sample_dir=str(sample_dir),
    )
    train(corpus_dir, cfg)
    grids = sorted(p.name for p in sample_dir.glob("*.png"))
    assert grids == ["samples_000004_4x4.png", "samples_000008_8x8.png"]
    from PIL import Image

    with Image.open(sample_dir / grids[1]) as img:
        assert img.size == (4 * 8, 4 * 8)  # 16 faces in a 4x4 contact sheet


def test_best_sample_mse_identity(tiny_weights):
    # A sample rendered by the generator itself scores (near) zero against
    # the best-of-N probe when it is one of the candidates.
    g = torch.Generator().manual_seed(0)
    z = torch.randn((4, TINY.latent_dim), generator=g, dtype=torch.float64)
    from facecraft.generator import mapping_forward, synthesis_forward

    with torch.no_grad():
        w = mapping_forward(tiny_weights.params, TINY.mapping_depth, z)
        wp = w.unsqueeze(1).expand(-1, 2, -1)
        face_t = synthesis_forward(TINY, tiny_weights.params, wp, None)[0]
    target = FaceTexture(np.clip(face_t.permute(1, 2, 0).numpy(), 0.0, 1.0))
    assert best_sample_mse(tiny_weights, target, n_samples=4, seed=0) < 1e-15
