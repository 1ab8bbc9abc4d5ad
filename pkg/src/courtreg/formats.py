"""File formats: the KCHM tensor container and JSON documents.

KCHM layout (little-endian)::

    0   4s  magic  b"KCHM"
    4   u32 version (1)
    8   u8  dtype  (0 = float32 scores, 1 = uint16 label map)
    9   3x  reserved, zero
    12  3u32 C, H, W  (label maps use C = 1)
    24  payload, C*H*W values, channel-major then row-major
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .court import KeypointLayout
from .heatmaps import ClassMap, HeatmapTensor
from .homography import Homography

MAGIC = b"KCHM"
VERSION = 1
DTYPE_FLOAT32 = 0
DTYPE_UINT16 = 1
_HEADER = struct.Struct("<4sIB3s3I")
HEADER_SIZE = _HEADER.size
_PAYLOAD_DTYPES = {DTYPE_FLOAT32: np.dtype("<f4"), DTYPE_UINT16: np.dtype("<u2")}


class FormatError(ValueError):
    """Malformed file contents."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class UnsupportedDtypeError(FormatError):
    pass


class SizeMismatchError(FormatError):
    pass


class NonFiniteError(FormatError):
    pass


def write_tensor(t: HeatmapTensor | ClassMap | np.ndarray) -> bytes:
    """Serialize a score tensor (C, H, W) or a label map (H, W)."""
    if isinstance(t, HeatmapTensor):
        arr = t.scores
    elif isinstance(t, ClassMap):
        arr = t.labels
    else:
        arr = np.asarray(t)

    if arr.ndim == 3 and np.issubdtype(arr.dtype, np.floating):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("float payload contains NaN or Inf")
        code, payload = DTYPE_FLOAT32, arr.astype("<f4", copy=False)
        C, H, W = arr.shape
    elif arr.ndim == 2 and np.issubdtype(arr.dtype, np.integer):
        if arr.size and (arr.min() < 0 or arr.max() > 0xFFFF):
            raise FormatError("label values must fit in uint16")
        code, payload = DTYPE_UINT16, arr.astype("<u2", copy=False)
        C, (H, W) = 1, arr.shape
    else:
        raise FormatError(f"cannot serialize array of shape {arr.shape} and dtype {arr.dtype}")
    header = _HEADER.pack(MAGIC, VERSION, code, b"\0\0\0", C, H, W)
    return header + np.ascontiguousarray(payload).tobytes()


def read_tensor(data: bytes, stride: int = 4) -> HeatmapTensor | ClassMap:
    if len(data) < HEADER_SIZE:
        raise SizeMismatchError(f"file is {len(data)} bytes, shorter than the {HEADER_SIZE}-byte header")
    magic, version, code, reserved, C, H, W = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if code not in _PAYLOAD_DTYPES:
        raise UnsupportedDtypeError(f"unsupported dtype code {code}")
    if reserved != b"\0\0\0":
        raise FormatError("reserved header bytes must be zero")
    if code == DTYPE_UINT16 and C != 1:
        raise FormatError(f"label maps must have C = 1, got {C}")
    dt = _PAYLOAD_DTYPES[code]
    expected = C * H * W * dt.itemsize
    actual = len(data) - HEADER_SIZE
    if actual != expected:
        raise SizeMismatchError(f"payload is {actual} bytes, header declares {expected}")
    arr = np.frombuffer(data, dtype=dt, offset=HEADER_SIZE).reshape(C, H, W)
    if code == DTYPE_FLOAT32:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("float payload contains NaN or Inf")
        return HeatmapTensor(arr.astype(np.float32), stride)
    return ClassMap(arr[0].astype(np.int64), None, stride)


def save_tensor(path: str | Path, t) -> None:
    Path(path).write_bytes(write_tensor(t))


def load_tensor(path: str | Path, stride: int = 4) -> HeatmapTensor | ClassMap:
    return read_tensor(Path(path).read_bytes(), stride)


def dumps_json(obj: Any) -> str:
    # repr-based float formatting round-trips doubles exactly
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def save_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def load_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def load_homography(path: str | Path) -> Homography:
    d = load_json(path)
    try:
        return Homography.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed homography ({exc})") from exc


def save_homography(path: str | Path, h: Homography) -> None:
    save_json(path, h.to_dict())


def load_layout(path: str | Path) -> KeypointLayout:
    d = load_json(path)
    try:
        return KeypointLayout.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed layout ({exc})") from exc


def save_layout(path: str | Path, layout: KeypointLayout) -> None:
    save_json(path, layout.to_dict())
