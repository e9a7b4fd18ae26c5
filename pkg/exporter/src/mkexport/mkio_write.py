"""Writers for the interchange formats the scoring toolchain consumes.

Bundle wire format (little-endian):
    "MKIO" | u32 version=1 | u32 N | u32 H | u32 W | u32 C |
    N*H*W f32 masks (query-major, row-major) | N*(C+1) f32 class rows.

Road/label maps are binary portable graymaps (P5, maxval 255).
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"MKIO"
VERSION = 1
_HEADER = struct.Struct("<4s5I")


def _atomic_write(path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_bundle(masks: np.ndarray, probs: np.ndarray, destination):
    """masks: (N, H, W) float in [0, 1]; probs: (N, C + 1) float rows."""
    n, h, w = masks.shape
    c = probs.shape[1] - 1
    header = _HEADER.pack(MAGIC, VERSION, n, h, w, c)
    payload = (
        np.ascontiguousarray(masks, dtype="<f4").tobytes()
        + np.ascontiguousarray(probs, dtype="<f4").tobytes()
    )
    _atomic_write(destination, header + payload)


def write_graymap(values: np.ndarray, destination):
    """values: (H, W) uint8."""
    h, w = values.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    _atomic_write(destination, header + np.ascontiguousarray(values, dtype=np.uint8).tobytes())
