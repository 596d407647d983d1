"""Command-line front end: refine, train, invert, edit, generate, assemble, serve.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Every subcommand
takes --json to emit one machine-readable record on stdout instead of the
human summary. All seeds are surfaced as flags, so identical invocations
produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import checkpoints
from .dataset import REPORT_FILENAME, RefinementConfig, refine_corpus
from .editing import EditConfig, edit_from_source
from .errors import FacecraftError, NonFiniteLossError
from .generator import (
    GeneratorConfig,
    GeneratorWeights,
    ensure_w_avg,
    sample_random_latent,
    synthesize,
)
from .inversion import N_VALUES, InversionConfig, invert, write_trajectory_jsonl
from .scorers import get_scorer
from .textures import (
    default_base_skin,
    embed_face,
    load_face,
    load_image,
    load_skin,
    save_face,
    save_skin,
)
from .training import TrainConfig, train

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract reserves 2 for
    runtime failures, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _emit(args, record: dict, human: str) -> None:
    if args.json:
        print(json.dumps(record, sort_keys=True))
    else:
        print(human)


def _load_weights(path: str) -> GeneratorWeights:
    return checkpoints.load_weights(path)


# --- subcommand implementations ---


def cmd_refine(args) -> int:
    config = RefinementConfig(
        std_threshold=args.std_threshold, mono_tolerance=args.mono_tol
    )
    report = refine_corpus(args.in_dir, args.out_dir, config)
    report_path = str(Path(args.out_dir) / REPORT_FILENAME)
    _emit(
        args,
        {
            "command": "refine",
            "accepted": report.accepted_count,
            "rejected": report.rejected_count,
            "report": report_path,
        },
        f"accepted={report.accepted_count} rejected={report.rejected_count}\n"
        f"report: {report_path}",
    )
    return 0


def cmd_train(args) -> int:
    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
    gen_cfg = GeneratorConfig(**overrides.pop("generator", {}))
    config = TrainConfig(generator=gen_cfg, **overrides)
    weights, log = train(args.corpus, config)
    if args.log:
        log.write_jsonl(args.log)
    if log.failed:
        print(f"training aborted: {log.failure}", file=sys.stderr)
        return RUNTIME_EXIT
    checkpoints.save_weights(weights, args.out)
    _emit(
        args,
        {
            "command": "train",
            "iterations": len(log.records),
            "weights": args.out,
            "log": args.log,
        },
        f"trained {len(log.records)} iterations -> {args.out}",
    )
    return 0


def cmd_invert(args) -> int:
    weights = _load_weights(args.weights)
    image = load_image(args.image)
    config = InversionConfig(
        lambda_mse=args.lambda_mse,
        lambda_stat=args.lambda_stat,
        steps=args.steps,
        learning_rate=args.lr,
        init=args.init,
        init_seed=args.seed,
        record_trajectory=args.trajectory is not None,
    )
    result = invert(weights, image, config)
    checkpoints.save_latent(result.latent, args.out_latent)
    save_face(result.rendered, args.out_face)
    if args.trajectory:
        write_trajectory_jsonl(result.loss_trajectory, args.trajectory)
    mse_per_value = result.mse_term / N_VALUES
    _emit(
        args,
        {
            "command": "invert",
            "final_loss": result.final_loss,
            "mse_term": result.mse_term,
            "mse_per_value": mse_per_value,
            "stat_term": result.stat_term,
            "latent": args.out_latent,
            "face": args.out_face,
        },
        f"final_loss={result.final_loss:.6g} mse_per_value={mse_per_value:.6g} "
        f"stat_term={result.stat_term:.6g}\nlatent: {args.out_latent}\nface: {args.out_face}",
    )
    return 0


def _edit_source(args):
    if args.latent:
        return checkpoints.load_latent(args.latent)
    if args.average:
        return "average"
    return ("random", args.random_seed)


def cmd_edit(args) -> int:
    weights = _load_weights(args.weights)
    scorer = get_scorer(args.scorer)
    config = EditConfig(
        lambda_l2=args.lambda_l2,
        steps=args.steps,
        learning_rate=args.lr,
        seed=args.seed,
    )
    result = edit_from_source(weights, _edit_source(args), args.prompt, scorer, config)
    checkpoints.save_latent(result.latent, args.out_latent)
    save_face(result.rendered, args.out_face)
    _emit(
        args,
        {
            "command": "edit",
            "total": result.total,
            "clip_term": result.clip_term,
            "l2_term": result.l2_term,
            "latent": args.out_latent,
            "face": args.out_face,
        },
        f"total={result.total:.6g} clip_term={result.clip_term:.6g} "
        f"l2_term={result.l2_term:.6g}\nlatent: {args.out_latent}\nface: {args.out_face}",
    )
    return 0


def cmd_generate(args) -> int:
    weights = _load_weights(args.weights)
    if args.mode == "average":
        latent = ensure_w_avg(weights).copy()
    else:
        latent = sample_random_latent(weights, truncation=args.truncation, seed=args.seed)
    face = synthesize(weights, latent)
    save_face(face, args.out_face)
    if args.out_latent:
        checkpoints.save_latent(latent, args.out_latent)
    _emit(
        args,
        {
            "command": "generate",
            "mode": args.mode,
            "face": args.out_face,
            "latent": args.out_latent,
        },
        f"face: {args.out_face}",
    )
    return 0


def cmd_assemble(args) -> int:
    face = load_face(args.face)
    base = load_skin(args.base) if args.base else default_base_skin(args.variant)
    skin = embed_face(face, base)
    save_skin(skin, args.out)
    _emit(
        args,
        {"command": "assemble", "skin": args.out, "variant": skin.variant},
        f"skin: {args.out}",
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.load(args.config)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


# --- parser wiring ---


def build_parser() -> _Parser:
    parser = _Parser(prog="facecraft", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--json", action="store_true", help="emit one JSON record on stdout")
        return p

    p = add("refine", cmd_refine, "filter a raw skin/face directory into a training corpus")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of raw skin or face PNGs")
    p.add_argument("--out", dest="out_dir", required=True, help="output corpus directory")
    p.add_argument("--std-threshold", type=float, default=0.02, help="reject faces whose mean channel std falls below this")
    p.add_argument("--mono-tol", type=float, default=1.0 / 255.0, help="Chebyshev tolerance for the single-color filter")

    p = add("train", cmd_train, "adversarially train a generator on a face corpus")
    p.add_argument("--corpus", required=True, help="directory of 8x8 face PNGs")
    p.add_argument("--config", help="JSON file of training-config overrides")
    p.add_argument("--out", required=True, help="output weights checkpoint path")
    p.add_argument("--log", help="optional JSONL path for per-iteration records")

    p = add("invert", cmd_invert, "project an image into the latent space")
    p.add_argument("--image", required=True, help="input PNG or JPEG")
    p.add_argument("--weights", required=True, help="generator checkpoint")
    p.add_argument("--out-latent", required=True, help="output latent file")
    p.add_argument("--out-face", required=True, help="output 8x8 face PNG")
    p.add_argument("--lambda-mse", type=float, default=1.0, help="reconstruction weight")
    p.add_argument("--lambda-stat", type=float, default=0.5, help="channel-statistics weight")
    p.add_argument("--steps", type=int, default=500, help="optimization steps")
    p.add_argument("--lr", type=float, default=0.05, help="optimizer learning rate")
    p.add_argument("--init", choices=("average", "random"), default="average", help="starting latent")
    p.add_argument("--seed", type=int, default=0, help="seed for --init random")
    p.add_argument("--trajectory", help="optional JSONL path for the loss trajectory")

    p = add("edit", cmd_edit, "optimize a latent toward a text prompt")
    p.add_argument("--weights", required=True, help="generator checkpoint")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--latent", help="latent file to edit")
    source.add_argument("--average", action="store_true", help="start from the average latent")
    source.add_argument("--random-seed", type=int, help="start from a seeded random latent")
    p.add_argument("--prompt", required=True, help="text prompt")
    p.add_argument("--scorer", default="mean-red", help="scorer spec: mean-red | color:R,G,B | brightness:V")
    p.add_argument("--lambda-l2", type=float, default=0.008, help="leash weight toward the source latent")
    p.add_argument("--steps", type=int, default=100, help="optimization steps")
    p.add_argument("--lr", type=float, default=0.1, help="optimizer learning rate")
    p.add_argument("--seed", type=int, default=0, help="optimization seed")
    p.add_argument("--out-latent", required=True, help="output latent file")
    p.add_argument("--out-face", required=True, help="output 8x8 face PNG")

    p = add("generate", cmd_generate, "render a face from the average or a random latent")
    p.add_argument("--weights", required=True, help="generator checkpoint")
    p.add_argument("--mode", choices=("random", "average"), required=True)
    p.add_argument("--truncation", type=float, default=1.0, help="blend toward the average latent (random mode)")
    p.add_argument("--seed", type=int, default=0, help="latent seed (random mode)")
    p.add_argument("--out-face", required=True, help="output 8x8 face PNG")
    p.add_argument("--out-latent", help="optional output latent file")

    p = add("assemble", cmd_assemble, "embed a face into a full skin sheet")
    p.add_argument("--face", required=True, help="8x8 face PNG")
    p.add_argument("--base", help="base skin PNG; bundled base when omitted")
    p.add_argument("--variant", choices=("modern", "legacy"), default="modern", help="bundled base variant")
    p.add_argument("--out", required=True, help="output skin PNG")

    p = add("serve", cmd_serve, "run the HTTP job service")
    p.add_argument("--config", help="JSON service-config file")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteLossError as exc:
        step = f" (step {exc.step})" if exc.step is not None else ""
        print(f"facecraft {args.command}: non-finite objective{step}: {exc}", file=sys.stderr)
        return RUNTIME_EXIT
    except OSError as exc:
        detail = exc.strerror or exc
        name = f": {exc.filename}" if exc.filename else ""
        print(f"facecraft {args.command}: {detail}{name}", file=sys.stderr)
        return RUNTIME_EXIT
    except (FacecraftError, ValueError, json.JSONDecodeError) as exc:
        print(f"facecraft {args.command}: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
