"""Corpus refinement: scan raw skin files, crop faces, reject degenerate ones.

Filters run in a fixed order per file (unreadable -> monochrome -> low_std ->
checkerboard, first match wins) so every rejection carries exactly one reason.
Accepted faces land in the output directory as 8x8 PNGs next to a
line-delimited JSON report.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import textures
from .errors import FacecraftError
from .textures import FaceTexture

REPORT_FILENAME = "refinement_report.jsonl"

REASON_NONE = "none"
REASON_LOW_STD = "low_std"
REASON_CHECKERBOARD = "checkerboard"
REASON_MONOCHROME = "monochrome"
REASON_UNREADABLE = "unreadable"


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean and population standard deviation of a face."""

    mu: tuple[float, float, float]
    sigma: tuple[float, float, float]


@dataclass(frozen=True)
class RefinementDecision:
    source: str
    outcome: str  # "accepted" | "rejected"
    reason: str = REASON_NONE

    def __post_init__(self):
        rejected = self.outcome == "rejected"
        if rejected != (self.reason != REASON_NONE):
            raise ValueError("outcome is rejected iff reason != none")


@dataclass
class RefinementReport:
    decisions: list[RefinementDecision] = field(default_factory=list)

    @property
    def accepted_count(self) -> int:
        return sum(1 for d in self.decisions if d.outcome == "accepted")

    @property
    def rejected_count(self) -> int:
        return sum(1 for d in self.decisions if d.outcome == "rejected")

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for d in self.decisions:
                fh.write(
                    json.dumps(
                        {"path": d.source, "outcome": d.outcome, "reason": d.reason}
                    )
                    + "\n"
                )


@dataclass(frozen=True)
class RefinementConfig:
    # Thresholds live on the [0,1] channel scale.
    std_threshold: float = 0.02
    mono_tolerance: float = 1.0 / 255.0

    def __post_init__(self):
        if self.std_threshold < 0 or self.mono_tolerance < 0:
            raise ValueError("thresholds must be nonnegative")


def channel_stats(face: FaceTexture) -> ChannelStats:
    """Mean and population std (divide by N, not N-1) over the 64 pixels."""
    flat = face.pixels.reshape(-1, 3)
    mu = flat.mean(axis=0)
    sigma = flat.std(axis=0)  # numpy default ddof=0: population std
    return ChannelStats(mu=tuple(mu.tolist()), sigma=tuple(sigma.tolist()))


def is_low_variance(face: FaceTexture, threshold: float) -> bool:
    """True iff the mean of the three channel sigmas is strictly below threshold."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    stats = channel_stats(face)
    return float(np.mean(stats.sigma)) < threshold


def _quantized(face: FaceTexture) -> np.ndarray:
    return textures.quantize(face.pixels)


def _dominant_color(q: np.ndarray) -> tuple[int, int, int]:
    counts = Counter(map(tuple, q.reshape(-1, 3).tolist()))
    best = max(counts.items(), key=lambda kv: (kv[1], tuple(-c for c in kv[0])))
    return best[0]


def is_monochromatic(face: FaceTexture, tolerance: float) -> bool:
    """True iff every pixel lies within ``tolerance`` (Chebyshev distance,
    [0,1] scale) of the face's most frequent quantized color.

    Distances are measured between quantized values so that any face whose
    pixels all land on one byte triple counts as exactly monochrome.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be nonnegative")
    q = _quantized(face)
    mode = np.asarray(_dominant_color(q), dtype=np.float64)
    dist = np.abs(q.astype(np.float64) - mode).max() / 255.0
    return bool(dist <= tolerance)


def is_checkerboard(face: FaceTexture) -> bool:
    """True iff the face has >= 2 distinct quantized colors and equals the
    tiling of its top-left p x p block for some p in {2, 4}."""
    q = _quantized(face)
    n_colors = len(np.unique(q.reshape(-1, 3), axis=0))
    if n_colors < 2:
        return False
    for p in (2, 4):
        tile = q[:p, :p]
        reps = textures.FACE_SIZE // p
        if np.array_equal(np.tile(tile, (reps, reps, 1)), q):
            return True
    return False


def classify_face(face: FaceTexture, config: RefinementConfig) -> str:
    """Reject reason for a face, or REASON_NONE if it passes all filters."""
    if is_monochromatic(face, config.mono_tolerance):
        return REASON_MONOCHROME
    if is_low_variance(face, config.std_threshold):
        return REASON_LOW_STD
    if is_checkerboard(face):
        return REASON_CHECKERBOARD
    return REASON_NONE


def _read_face(path: Path) -> FaceTexture | None:
    """Face crop from a skin sheet or a pre-cropped 8x8 file; None if unusable."""
    try:
        img = textures.load_image(path)
    except (FacecraftError, FileNotFoundError):
        return None
    h, w = img.height, img.width
    if (h, w) == (textures.FACE_SIZE, textures.FACE_SIZE):
        return FaceTexture(img.pixels)
    if w == textures.SKIN_WIDTH and h in (
        textures.SKIN_HEIGHT_MODERN,
        textures.SKIN_HEIGHT_LEGACY,
    ):
        # Full sheets go through the skin path so transparency is preserved
        # as stored bytes rather than composited over white.
        return textures.extract_face(textures.load_skin(path))
    return None


def refine_corpus(
    input_dir: str | Path,
    output_dir: str | Path,
    config: RefinementConfig | None = None,
) -> RefinementReport:
    """Refine every skin/face file under ``input_dir`` into ``output_dir``.

    Accepted faces are written as 8x8 PNGs named by scan index + source stem;
    the report is persisted alongside them as JSON lines. Unreadable files
    become rejected(unreadable) decisions and never abort the run. Files are
    scanned in sorted path order, so reports are deterministic.
    """
    config = config or RefinementConfig()
    input_dir = Path(input_dir)
    output_dir = Path(output_dir)
    if not input_dir.is_dir():
        raise OSError(f"input directory not readable: {input_dir}")
    output_dir.mkdir(parents=True, exist_ok=True)

    paths = sorted(p for p in input_dir.iterdir() if p.is_file())
    report = RefinementReport()
    for idx, path in enumerate(paths):
        face = _read_face(path)
        if face is None:
            report.decisions.append(
                RefinementDecision(str(path), "rejected", REASON_UNREADABLE)
            )
            continue
        reason = classify_face(face, config)
        if reason == REASON_NONE:
            textures.save_face(face, output_dir / f"{idx:05d}_{path.stem}.png")
            report.decisions.append(RefinementDecision(str(path), "accepted"))
        else:
            report.decisions.append(RefinementDecision(str(path), "rejected", reason))

    report.write_jsonl(output_dir / REPORT_FILENAME)
    return report
