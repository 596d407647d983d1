"""Train a desk-scale generator checkpoint on a face corpus.

Builds a tiny synthetic corpus when --corpus is omitted, so the script runs
out of the box:

    python3 scripts/train_toy_checkpoint.py --out runs/toy

Point --corpus at a directory of refined 8x8 face PNGs (see
scripts/demo_pipeline.py or `facecraft refine`) to train on real data.
"""

import argparse
from pathlib import Path

import numpy as np

from facecraft import FaceTexture, TrainConfig, save_face, save_weights, train
from facecraft.generator import GeneratorConfig


def make_synthetic_corpus(directory: Path, count: int, seed: int) -> Path:
    """A few smooth two-tone faces: enough structure to watch training move.

    Mid-tone on purpose: corpus extremes near 0 or 1 reward tanh-rail
    saturation at desk scale, and the generator stops learning there.
    """
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ramp = np.linspace(0.0, 1.0, 8)
    for i in range(count):
        top, bottom = rng.uniform(0.25, 0.75, 3), rng.uniform(0.25, 0.75, 3)
        face = top[None, None, :] * (1 - ramp)[:, None, None] + bottom[None, None, :] * ramp[:, None, None]
        face = np.clip(face + rng.normal(0.0, 0.03, size=(8, 8, 3)), 0.05, 0.95)
        save_face(FaceTexture(face), directory / f"synthetic_{i:03d}.png")
    return directory


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", help="directory of 8x8 face PNGs (synthetic corpus when omitted)")
    parser.add_argument("--out", required=True, help="output directory for weights, log, and sample grids")
    parser.add_argument("--iterations", type=int, default=250, help="iterations per stage")
    parser.add_argument("--batch", type=int, default=32, help="batch size for both stages")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--channels", type=int, default=32, help="generator channel width")
    parser.add_argument("--sample-every", type=int, default=50, help="write a 4x4 sample grid every N iterations")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = Path(args.corpus) if args.corpus else make_synthetic_corpus(out / "corpus", 12, args.seed)

    config = TrainConfig(
        stage1_iterations=args.iterations,
        stage2_iterations=args.iterations,
        stage1_batch=args.batch,
        stage2_batch=args.batch,
        seed=args.seed,
        generator=GeneratorConfig(channels=args.channels),
        sample_grid_every=args.sample_every,
        sample_dir=str(out / "samples"),
    )
    print(f"training on {corpus} for {args.iterations}+{args.iterations} iterations")
    last = [-1]

    def progress(fraction):
        decile = int(fraction * 10)
        if decile > last[0]:
            last[0] = decile
            print(f"train: {fraction:4.0%}")

    weights, log = train(corpus, config, progress_cb=progress)

    log_path = out / "train_log.jsonl"
    log.write_jsonl(log_path)
    if log.failed:
        print(f"training failed: {log.failure} (partial log at {log_path})")
        return 1

    weights_path = out / "weights.fcgw"
    save_weights(weights, weights_path)
    last = log.records[-1]
    print(f"weights: {weights_path}")
    print(f"log: {log_path} ({len(log.records)} iterations)")
    print(f"final losses: g={last.g_loss:.4f} d={last.d_loss:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
