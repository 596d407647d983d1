"""Versioned binary files for generator weights and latents.

One layout for both: magic bytes, a u16 format version, a length-prefixed
JSON metadata block, raw little-endian float32 parameter blobs in canonical
order, and a trailing CRC32 of everything before it.
"""

from __future__ import annotations

import errno
import json
import struct
import zlib
from pathlib import Path

import numpy as np
import torch

from .errors import ChecksumError, VersionMismatchError
from .generator import GeneratorConfig, GeneratorWeights, LEVEL_COUNT, param_specs

WEIGHTS_MAGIC = b"FCGW"
LATENT_MAGIC = b"FCLT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHI")  # magic, version, metadata length
_CRC = struct.Struct("<I")


def _pack(magic: bytes, metadata: dict, blob: np.ndarray) -> bytes:
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    body = _HEADER.pack(magic, FORMAT_VERSION, len(meta)) + meta
    body += np.ascontiguousarray(blob, dtype="<f4").tobytes()
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def _unpack(data: bytes, magic: bytes, what: str) -> tuple[dict, np.ndarray]:
    if len(data) < _HEADER.size + _CRC.size:
        raise ChecksumError(f"{what} file is truncated")
    file_magic, version, meta_len = _HEADER.unpack_from(data, 0)
    if file_magic != magic or version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{what} file has magic {file_magic!r} version {version}, "
            f"expected {magic!r} version {FORMAT_VERSION}"
        )
    body, crc_bytes = data[: -_CRC.size], data[-_CRC.size :]
    if _CRC.unpack(crc_bytes)[0] != (zlib.crc32(body) & 0xFFFFFFFF):
        raise ChecksumError(f"{what} file failed its checksum")
    meta_start = _HEADER.size
    meta_end = meta_start + meta_len
    if meta_end > len(body):
        raise ChecksumError(f"{what} metadata block is truncated")
    try:
        metadata = json.loads(body[meta_start:meta_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChecksumError(f"{what} metadata block is corrupt: {exc}") from exc
    blob = np.frombuffer(body[meta_end:], dtype="<f4")
    return metadata, blob


def save_weights(weights: GeneratorWeights, path: str | Path) -> None:
    """Write a checkpoint; parameters (and the cached average latent, if
    present) are stored as float32 blobs."""
    cfg = weights.config
    metadata = {
        "kind": "generator_weights",
        "latent_dim": cfg.latent_dim,
        "mapping_depth": cfg.mapping_depth,
        "channels": cfg.channels,
        "level_count": cfg.level_count,
        "has_w_avg": weights.w_avg is not None,
    }
    parts = [weights.params[name].numpy().ravel() for name, _ in param_specs(cfg)]
    if weights.w_avg is not None:
        parts.append(np.asarray(weights.w_avg, dtype=np.float64).ravel())
    blob = np.concatenate(parts) if parts else np.zeros(0)
    Path(path).write_bytes(_pack(WEIGHTS_MAGIC, metadata, blob))


def load_weights(path: str | Path) -> GeneratorWeights:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(errno.ENOENT, "no such file", str(path))
    metadata, blob = _unpack(path.read_bytes(), WEIGHTS_MAGIC, "weights")
    try:
        config = GeneratorConfig(
            latent_dim=int(metadata["latent_dim"]),
            mapping_depth=int(metadata["mapping_depth"]),
            channels=int(metadata["channels"]),
        )
        has_w_avg = bool(metadata["has_w_avg"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ChecksumError(f"weights metadata is malformed: {exc}") from exc

    specs = param_specs(config)
    expected = sum(int(np.prod(shape)) for _, shape in specs)
    if has_w_avg:
        expected += LEVEL_COUNT * config.latent_dim
    if blob.size != expected:
        raise ChecksumError(
            f"weights blob holds {blob.size} values, expected {expected}"
        )

    params: dict[str, torch.Tensor] = {}
    offset = 0
    for name, shape in specs:
        n = int(np.prod(shape))
        arr = blob[offset : offset + n].astype(np.float64).reshape(shape)
        params[name] = torch.from_numpy(arr)
        offset += n
    w_avg = None
    if has_w_avg:
        w_avg = (
            blob[offset:].astype(np.float64).reshape(LEVEL_COUNT, config.latent_dim)
        )
    return GeneratorWeights(config, params, w_avg=w_avg)


def save_latent(w, path: str | Path) -> None:
    arr = np.asarray(w, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != LEVEL_COUNT:
        raise ValueError(f"latent must have shape (2, dim), got {arr.shape}")
    metadata = {"kind": "latent", "rows": int(arr.shape[0]), "dim": int(arr.shape[1])}
    Path(path).write_bytes(_pack(LATENT_MAGIC, metadata, arr.ravel()))


def load_latent(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(errno.ENOENT, "no such file", str(path))
    metadata, blob = _unpack(path.read_bytes(), LATENT_MAGIC, "latent")
    try:
        rows, dim = int(metadata["rows"]), int(metadata["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ChecksumError(f"latent metadata is malformed: {exc}") from exc
    if blob.size != rows * dim:
        raise ChecksumError(f"latent blob holds {blob.size} values, expected {rows * dim}")
    return blob.astype(np.float64).reshape(rows, dim)
