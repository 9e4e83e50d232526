"""Binary file formats: gesture dataset (TGK1) and model checkpoint (TGKM).

Both are little-endian with a fixed header; each writer also emits a JSON
sidecar/manifest describing the file.

TGK1 layout:
    magic "TGK1" | version u32 | n_recordings u32 | frames u32 | taxels u32
    per recording: label u8 | user_id u16 | seed u64 | frames*taxels*3 float32

TGKM layout:
    magic "TGKM" | version u32 | c_in u32
    parameters in declared order as float64
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .gestures import N_FRAMES, GestureClass, GestureRecording

DATASET_MAGIC = b"TGK1"
CHECKPOINT_MAGIC = b"TGKM"
FORMAT_VERSION = 1

_DATASET_HEADER = struct.Struct("<4sIIII")
_RECORD_HEADER = struct.Struct("<BHQ")
_CHECKPOINT_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    pass


def save_dataset(recordings: list[GestureRecording], path, config: dict | None = None) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_DATASET_HEADER.pack(DATASET_MAGIC, FORMAT_VERSION, len(recordings), N_FRAMES, 49))
        for rec in recordings:
            fh.write(_RECORD_HEADER.pack(int(rec.label), rec.user_id, rec.seed))
            fh.write(np.ascontiguousarray(rec.frames, dtype="<f4").tobytes())
    sidecar = {
        "format": "TGK1",
        "version": FORMAT_VERSION,
        "n_recordings": len(recordings),
        "frames": N_FRAMES,
        "taxels": 49,
        "config": config or {},
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=1))


def load_dataset(path) -> list[GestureRecording]:
    data = Path(path).read_bytes()
    if len(data) < _DATASET_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n_rec, frames, taxels = _DATASET_HEADER.unpack_from(data, 0)
    if magic != DATASET_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if frames != N_FRAMES or taxels != 49:
        raise FormatError(f"{path}: unexpected tensor dims {frames}x{taxels}")
    offset = _DATASET_HEADER.size
    block = frames * taxels * 3 * 4
    recordings = []
    for i in range(n_rec):
        label, user_id, seed = _RECORD_HEADER.unpack_from(data, offset)
        offset += _RECORD_HEADER.size
        frames_arr = np.frombuffer(data, dtype="<f4", count=frames * taxels * 3, offset=offset)
        offset += block
        recordings.append(GestureRecording(
            frames=frames_arr.reshape(frames, taxels, 3).copy(),
            label=GestureClass(label), user_id=user_id, recording_id=i, seed=seed))
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return recordings


def save_checkpoint(params: dict[str, np.ndarray], c_in: int, path, config: dict | None = None) -> None:
    """Write parameters in declared (insertion) order as float64."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, FORMAT_VERSION, c_in))
        for value in params.values():
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())
    manifest = {
        "format": "TGKM",
        "version": FORMAT_VERSION,
        "c_in": c_in,
        "parameters": {name: list(value.shape) for name, value in params.items()},
        "config": config or {},
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(manifest, indent=1))


def load_checkpoint(path, shapes: dict[str, tuple[int, ...]]) -> tuple[dict[str, np.ndarray], int]:
    data = Path(path).read_bytes()
    magic, version, c_in = _CHECKPOINT_HEADER.unpack_from(data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = _CHECKPOINT_HEADER.size
    params = {}
    for name, shape in shapes.items():
        count = int(np.prod(shape))
        if offset + count * 8 > len(data):
            raise FormatError(f"{path}: size does not match declared shapes")
        params[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += count * 8
    if offset != len(data):
        raise FormatError(f"{path}: size does not match declared shapes")
    return params, c_in
