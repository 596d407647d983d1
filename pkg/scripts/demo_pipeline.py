"""End-to-end walkthrough: refine a raw dump, train, invert, edit, assemble.

    python3 scripts/demo_pipeline.py --out runs/demo

Synthesizes a small raw download directory (good faces mixed with junk the
refiner must reject), then runs every pipeline stage and prints each
artifact path. Finishes in a couple of minutes on a laptop CPU.
"""

import argparse
from pathlib import Path

import numpy as np

from facecraft import (
    EditConfig,
    FaceTexture,
    InversionConfig,
    TrainConfig,
    edit,
    invert,
    load_image,
    refine_corpus,
    save_face,
    save_skin,
    save_weights,
    synthesize,
    train,
)
from facecraft.generator import GeneratorConfig, ensure_w_avg
from facecraft.scorers import MeanRedScorer
from facecraft.textures import default_base_skin, embed_face

FACE = 8


def progress_printer(prefix):
    """Pipe-friendly progress: one line per 10% step."""
    last = [-1]

    def cb(fraction):
        decile = int(fraction * 10)
        if decile > last[0]:
            last[0] = decile
            print(f"{prefix}: {fraction:4.0%}")

    return cb


def write_raw_dump(directory: Path, seed: int) -> Path:
    """Raw 'downloads': textured faces plus the degenerate junk refine rejects.

    Faces stay mid-tone: a desk-scale adversarial run rewards matching the
    corpus extremes, and near-black/near-white pixels push the generator
    onto tanh's rails where it stops learning.
    """
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ramp = np.linspace(0.0, 1.0, FACE)
    for i in range(10):
        top, bottom = rng.uniform(0.25, 0.75, 3), rng.uniform(0.25, 0.75, 3)
        face = top[None, None, :] * (1 - ramp)[:, None, None] + bottom[None, None, :] * ramp[:, None, None]
        face = np.clip(face + rng.normal(0.0, 0.03, size=(FACE, FACE, 3)), 0.05, 0.95)
        save_face(FaceTexture(face), directory / f"face_{i:02d}.png")
    save_face(FaceTexture(np.full((FACE, FACE, 3), 0.6)), directory / "solid.png")
    checker = np.tile(np.array([[0.1, 0.9], [0.9, 0.1]])[:, :, None], (4, 4, 3))
    save_face(FaceTexture(checker), directory / "checker.png")
    (directory / "broken.png").write_bytes(b"not a png at all")
    return directory


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output directory for every artifact")
    parser.add_argument("--iterations", type=int, default=250, help="training iterations per stage")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    raw = write_raw_dump(out / "raw", args.seed)
    report = refine_corpus(raw, out / "corpus")
    print(f"refine: {report.accepted_count} accepted, {report.rejected_count} rejected -> {out / 'corpus'}")

    config = TrainConfig(
        stage1_iterations=args.iterations,
        stage2_iterations=args.iterations,
        seed=args.seed,
        generator=GeneratorConfig(channels=32),
    )
    weights, log = train(out / "corpus", config, progress_cb=progress_printer("train"))
    if log.failed:
        print(f"training failed: {log.failure}")
        return 1
    save_weights(weights, out / "weights.fcgw")
    print(f"train: weights -> {out / 'weights.fcgw'}")

    average_face = synthesize(weights, ensure_w_avg(weights))
    save_face(average_face, out / "average.png")
    print(f"generate: average face -> {out / 'average.png'}")

    target = out / "corpus" / sorted(p.name for p in (out / "corpus").glob("*.png"))[0]
    inversion = invert(weights, load_image(target), InversionConfig(steps=300))
    save_face(inversion.rendered, out / "inverted.png")
    print(f"invert: {target.name} -> {out / 'inverted.png'} (loss {inversion.final_loss:.5f})")

    edited = edit(weights, inversion.latent, "redder", MeanRedScorer(), EditConfig(lambda_l2=0.01))
    save_face(edited.rendered, out / "edited.png")
    before = float(np.array(inversion.rendered.pixels)[:, :, 0].mean())
    after = float(np.array(edited.rendered.pixels)[:, :, 0].mean())
    print(f"edit: mean red {before:.3f} -> {after:.3f}, face -> {out / 'edited.png'}")

    skin = embed_face(edited.rendered, default_base_skin("modern"))
    save_skin(skin, out / "skin.png")
    print(f"assemble: full skin -> {out / 'skin.png'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
