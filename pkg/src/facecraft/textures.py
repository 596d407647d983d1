"""Pixel-exact texture types and file I/O.

Three value types cover the whole pipeline: ``SourceImage`` (any real image,
float channels in [0,1]), ``FaceTexture`` (the 8x8 unit the generator produces
and the optimizers consume), and ``SkinTexture`` (the full 8-bit RGBA game
sheet). Floats everywhere in memory; 8-bit only at file boundaries.
"""

from __future__ import annotations

import errno
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, TooSmallError

FACE_SIZE = 8
# Face rectangle on the skin sheet: columns 8..15, rows 8..15 (0-indexed),
# identical for the modern 64x64 and legacy 64x32 variants.
FACE_COLS = slice(8, 16)
FACE_ROWS = slice(8, 16)

SKIN_WIDTH = 64
SKIN_HEIGHT_MODERN = 64
SKIN_HEIGHT_LEGACY = 32


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FaceTexture:
    """8x8 RGB image, float64 channels in [0,1]."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.shape != (FACE_SIZE, FACE_SIZE, 3):
            raise ValueError(f"face texture must be 8x8x3, got {arr.shape}")
        if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("face texture channels must lie in [0,1]")
        object.__setattr__(self, "pixels", _frozen(arr))

    def allclose(self, other: "FaceTexture", atol: float = 0.0) -> bool:
        return bool(np.allclose(self.pixels, other.pixels, rtol=0.0, atol=atol))


@dataclass(frozen=True)
class SkinTexture:
    """64x64 (modern) or 64x32 (legacy) RGBA skin sheet, uint8 channels."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.dtype != np.uint8:
            raise ValueError(f"skin pixels must be uint8, got {arr.dtype}")
        if arr.shape not in (
            (SKIN_HEIGHT_MODERN, SKIN_WIDTH, 4),
            (SKIN_HEIGHT_LEGACY, SKIN_WIDTH, 4),
        ):
            raise ValueError(f"skin must be 64x64x4 or 32x64x4, got {arr.shape}")
        object.__setattr__(self, "pixels", _frozen(arr))

    @property
    def variant(self) -> str:
        return "modern" if self.pixels.shape[0] == SKIN_HEIGHT_MODERN else "legacy"


@dataclass(frozen=True)
class SourceImage:
    """HxW RGB image with float64 channels in [0,1]; H, W >= 8."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"source image must be HxWx3, got {arr.shape}")
        if arr.shape[0] < FACE_SIZE or arr.shape[1] < FACE_SIZE:
            raise TooSmallError(
                f"source image must be at least 8x8, got {arr.shape[0]}x{arr.shape[1]}"
            )
        if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("source image channels must lie in [0,1]")
        object.__setattr__(self, "pixels", _frozen(arr))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def load_image(path: str | Path) -> SourceImage:
    """Load a PNG or JPEG as a SourceImage.

    Channels are normalized to [0,1]; an alpha channel, if present, is
    composited over opaque white. Raises ``FileNotFoundError``,
    ``DecodeError`` for corrupt/unsupported files, ``TooSmallError`` when
    either dimension is below 8.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(errno.ENOENT, "no such file", str(path))
    try:
        with Image.open(path) as img:
            rgba = img.convert("RGBA")
            arr = np.asarray(rgba, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    if arr.shape[0] < FACE_SIZE or arr.shape[1] < FACE_SIZE:
        raise TooSmallError(
            f"{path}: image must be at least 8x8, got {arr.shape[0]}x{arr.shape[1]}"
        )
    alpha = arr[:, :, 3:4]
    rgb = arr[:, :, :3] * alpha + (1.0 - alpha)
    return SourceImage(np.clip(rgb, 0.0, 1.0))


def load_skin(path: str | Path) -> SkinTexture:
    """Load a skin sheet PNG (64x64 or 64x32) as uint8 RGBA."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(errno.ENOENT, "no such file", str(path))
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGBA"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    return SkinTexture(arr)


def save_skin(skin: SkinTexture, path: str | Path) -> None:
    """Write a skin as an 8-bit RGBA PNG; reload yields identical pixels."""
    Image.fromarray(skin.pixels, mode="RGBA").save(Path(path), format="PNG")


def skin_png_bytes(skin: SkinTexture) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(skin.pixels, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()


def quantize(channels: np.ndarray) -> np.ndarray:
    """[0,1] floats -> uint8 via round(c*255), ties to even."""
    return np.rint(np.asarray(channels, dtype=np.float64) * 255.0).astype(np.uint8)


def dequantize(bytes_: np.ndarray) -> np.ndarray:
    """uint8 -> float64 via q/255."""
    return np.asarray(bytes_, dtype=np.float64) / 255.0


def save_face(face: FaceTexture, path: str | Path) -> None:
    """Write a face as an 8-bit RGB PNG (quantized)."""
    Image.fromarray(quantize(face.pixels), mode="RGB").save(Path(path), format="PNG")


def face_png_bytes(face: FaceTexture) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(quantize(face.pixels), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def load_face(path: str | Path) -> FaceTexture:
    """Load an 8x8 PNG as a FaceTexture (alpha composited over white)."""
    img = load_image(path)
    if img.pixels.shape[:2] != (FACE_SIZE, FACE_SIZE):
        raise ValueError(f"{path}: expected an 8x8 face, got {img.height}x{img.width}")
    return FaceTexture(img.pixels)


def embed_face(face: FaceTexture, base: SkinTexture) -> SkinTexture:
    """Return ``base`` with the face rectangle replaced by ``face``.

    Face channels are quantized to 8-bit, alpha set to 255; every pixel
    outside columns/rows 8..15 is untouched.
    """
    out = np.array(base.pixels, copy=True)
    out[FACE_ROWS, FACE_COLS, :3] = quantize(face.pixels)
    out[FACE_ROWS, FACE_COLS, 3] = 255
    return SkinTexture(out)


def extract_face(skin: SkinTexture) -> FaceTexture:
    """Return the face rectangle of a skin, dequantized; alpha discarded."""
    return FaceTexture(dequantize(skin.pixels[FACE_ROWS, FACE_COLS, :3]))


def downsample_to_face(image: SourceImage) -> FaceTexture:
    """Area-average an image down to 8x8.

    The image is partitioned into an 8x8 grid of rectangles with boundaries
    floor(i*H/8) / floor(j*W/8); block sizes differ by at most one pixel when
    H or W is not a multiple of 8. Each output pixel is the arithmetic mean
    of its block.
    """
    arr = image.pixels
    h, w = arr.shape[:2]
    row_edges = [(i * h) // FACE_SIZE for i in range(FACE_SIZE + 1)]
    col_edges = [(j * w) // FACE_SIZE for j in range(FACE_SIZE + 1)]
    # Two reduceat passes (rows then columns) then divide by block areas.
    row_sums = np.add.reduceat(arr, row_edges[:-1], axis=0)
    block_sums = np.add.reduceat(row_sums, col_edges[:-1], axis=1)
    row_sizes = np.diff(row_edges).astype(np.float64)
    col_sizes = np.diff(col_edges).astype(np.float64)
    areas = row_sizes[:, None] * col_sizes[None, :]
    out = block_sums / areas[:, :, None]
    return FaceTexture(np.clip(out, 0.0, 1.0))


def default_base_skin(variant: str = "modern") -> SkinTexture:
    """A bundled flat-color base skin supplying the non-face regions.

    A simple blocky character: brown hair, tan head, teal shirt, indigo
    legs, gray boots. Generated deterministically in code so the package
    ships no binary assets.
    """
    if variant not in ("modern", "legacy"):
        raise ValueError(f"unknown skin variant {variant!r}")
    height = SKIN_HEIGHT_MODERN if variant == "modern" else SKIN_HEIGHT_LEGACY
    arr = np.zeros((height, SKIN_WIDTH, 4), dtype=np.uint8)

    hair = (92, 58, 30, 255)
    skin_tone = (198, 152, 108, 255)
    shirt = (0, 128, 128, 255)
    sleeve = (0, 110, 110, 255)
    pants = (52, 56, 120, 255)
    boots = (72, 72, 72, 255)

    def fill(r0, r1, c0, c1, color):
        arr[r0:r1, c0:c1] = color

    # Head cross (top strip): top/bottom faces then the four sides.
    fill(0, 8, 8, 24, hair)
    fill(8, 16, 0, 32, skin_tone)
    fill(8, 10, 0, 32, hair)  # hairline wraps around the sides
    # Torso + right arm + right leg (middle strip).
    fill(16, 20, 4, 12, pants)
    fill(20, 32, 0, 16, pants)
    fill(30, 32, 0, 16, boots)
    fill(16, 20, 20, 36, shirt)
    fill(20, 32, 16, 40, shirt)
    fill(16, 20, 44, 52, sleeve)
    fill(20, 32, 40, 56, sleeve)
    if variant == "modern":
        # Left leg / left arm strips of the 64x64 layout.
        fill(48, 52, 20, 28, pants)
        fill(52, 64, 16, 32, pants)
        fill(62, 64, 16, 32, boots)
        fill(48, 52, 36, 44, sleeve)
        fill(52, 64, 32, 48, sleeve)
    return SkinTexture(arr)
