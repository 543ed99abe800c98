"""Binary heatmap container, extension `.ochm`.

Layout, all little-endian:

    magic    4 bytes  b"OCHM"
    version  u16      1
    reserved u16      0
    channels u32
    height   u32
    width    u32
    stride   f32
    payload  channels * height * width float32, channel-major, row-major

A JSON sidecar `<name>.ochm.json` with keys `image_id` (int) and
`category_ids` (list of ints, one per channel) ties the raster back to its
dataset.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import FormatError, ParseError
from .heatmap import Heatmap

MAGIC = b"OCHM"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIIf")


def write_ochm(heatmap: Heatmap, dst: str | Path | BinaryIO) -> None:
    """Serialize a heatmap to a path or binary file object."""
    c, h, w = heatmap.data.shape
    header = _HEADER.pack(MAGIC, VERSION, 0, c, h, w, float(heatmap.stride))
    payload = np.ascontiguousarray(heatmap.data, dtype="<f4").tobytes()
    if isinstance(dst, (str, Path)):
        with open(dst, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    else:
        dst.write(header)
        dst.write(payload)


def read_ochm(src: str | Path | BinaryIO) -> Heatmap:
    """Deserialize a heatmap, raising FormatError on any contract violation."""
    if isinstance(src, (str, Path)):
        with open(src, "rb") as fh:
            blob = fh.read()
    else:
        blob = src.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"file too short for header: {len(blob)} bytes")
    magic, version, reserved, c, h, w, stride = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if reserved != 0:
        raise FormatError(f"reserved field must be 0, got {reserved}")
    if not (math.isfinite(stride) and stride > 0):
        raise FormatError(f"invalid stride {stride}")
    expected = c * h * w * 4
    actual = len(blob) - _HEADER.size
    if actual != expected:
        raise FormatError(f"payload is {actual} bytes, header implies {expected}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(c, h, w)
    try:
        return Heatmap(data, float(stride))
    except ValueError as e:
        raise FormatError(f"invalid raster contents: {e}") from None


def sidecar_path(ochm_path: str | Path) -> Path:
    return Path(str(ochm_path) + ".json")


def write_sidecar(ochm_path: str | Path, image_id: int, category_ids) -> None:
    doc = {"image_id": int(image_id), "category_ids": [int(c) for c in category_ids]}
    sidecar_path(ochm_path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def read_sidecar(ochm_path: str | Path) -> tuple[int, list[int]]:
    """Read the sidecar for an .ochm file; raises ParseError when malformed."""
    path = sidecar_path(ochm_path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON: {e.msg}", offset=e.pos) from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object")
    image_id = doc.get("image_id")
    category_ids = doc.get("category_ids")
    if not isinstance(image_id, int) or isinstance(image_id, bool):
        raise ParseError(f"{path}: image_id must be an integer")
    if not isinstance(category_ids, list) or not all(
        isinstance(c, int) and not isinstance(c, bool) for c in category_ids
    ):
        raise ParseError(f"{path}: category_ids must be a list of integers")
    return image_id, list(category_ids)
