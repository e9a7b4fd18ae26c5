"""File formats: MKIO bundles, P5 label maps, query-set sidecars, reports.

Bundle wire format (all little-endian):
    magic "MKIO" (4 bytes) | u32 version | u32 N | u32 H | u32 W | u32 C |
    N*H*W f32 mask memberships (query-major, row-major) |
    N*(C+1) f32 class probabilities.

Heatmaps reuse the container with N=1 and C=0 (the single probability row
is then just [1.0]). All writes are atomic: temp file in the destination
directory, then rename.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    LabelViolation,
    MalformedHeader,
    TruncatedPayload,
)
from .model import AnomalyMap, ClassProbSet, LabelMap, QueryIndexSet, SoftMaskSet, validate_bundle

MAGIC = b"MKIO"
VERSION = 1
_HEADER = struct.Struct("<4s5I")

QUERY_SET_SCHEMA = "maskomaly/query-sets@1"


def _atomic_write_bytes(path, data: bytes):
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


def write_bundle(masks: SoftMaskSet, probs: ClassProbSet, destination):
    """Write a validated (masks, probs) pair; round-trips bit-exactly."""
    masks, probs = validate_bundle(masks, probs)
    header = _HEADER.pack(
        MAGIC, VERSION, masks.n_queries, masks.height, masks.width, probs.n_classes
    )
    payload = masks.values.astype("<f4").tobytes() + probs.values.astype("<f4").tobytes()
    _atomic_write_bytes(destination, header + payload)


def read_bundle(source):
    """Read and validate a bundle file into (SoftMaskSet, ClassProbSet)."""
    data = Path(source).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"{source}: expected magic {MAGIC!r}")
    if len(data) < _HEADER.size:
        raise TruncatedPayload(f"{source}: header needs {_HEADER.size} bytes, file has {len(data)}")
    _, version, n, h, w, c = _HEADER.unpack_from(data)
    if version != VERSION:
        raise MalformedHeader(f"{source}: unsupported version {version}")
    if n < 1 or h < 1 or w < 1:
        raise MalformedHeader(f"{source}: bad header dimensions N={n}, H={h}, W={w}")
    n_mask = n * h * w
    n_prob = n * (c + 1)
    expected = _HEADER.size + 4 * (n_mask + n_prob)
    if len(data) != expected:
        raise TruncatedPayload(f"{source}: expected {expected} bytes, file has {len(data)}")
    masks = np.frombuffer(data, dtype="<f4", count=n_mask, offset=_HEADER.size)
    probs = np.frombuffer(data, dtype="<f4", count=n_prob, offset=_HEADER.size + 4 * n_mask)
    return validate_bundle(
        masks.astype(np.float32).reshape(n, h, w),
        probs.astype(np.float32).reshape(n, c + 1),
    )


def write_heatmap(heatmap: AnomalyMap, destination):
    """Store an anomaly map in the bundle container (N=1, C=0)."""
    masks = SoftMaskSet(heatmap.values[np.newaxis])
    probs = ClassProbSet(np.ones((1, 1), dtype=np.float32))
    write_bundle(masks, probs, destination)


def read_heatmap(source) -> AnomalyMap:
    masks, probs = read_bundle(source)
    if masks.n_queries != 1 or probs.n_classes != 0:
        raise MalformedHeader(
            f"{source}: not a heatmap container (N={masks.n_queries}, C={probs.n_classes})"
        )
    return AnomalyMap(masks.values[0])


def is_heatmap(bundle) -> bool:
    masks, probs = bundle
    return masks.n_queries == 1 and probs.n_classes == 0


def write_labelmap(labels: LabelMap, destination):
    """Write a binary portable graymap (P5, maxval 255)."""
    header = f"P5\n{labels.width} {labels.height}\n255\n".encode("ascii")
    _atomic_write_bytes(destination, header + labels.values.tobytes())


def _pgm_tokens(data: bytes, count: int):
    """First `count` whitespace-separated tokens after the magic, skipping
    '#' comments, plus the offset of the byte after the final token."""
    tokens = []
    i = 2  # past "P5"
    while len(tokens) < count:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if i == start:
            raise MalformedHeader("graymap header ended before width/height/maxval")
        tokens.append(data[start:i])
    return tokens, i + 1  # single whitespace byte terminates the header


def read_labelmap(source) -> LabelMap:
    """Read a P5 graymap with values restricted to {0, 1, 255}."""
    data = Path(source).read_bytes()
    if data[:2] != b"P5":
        raise MalformedHeader(f"{source}: not a binary graymap (P5)")
    try:
        tokens, offset = _pgm_tokens(data, 3)
        width, height, maxval = (int(t) for t in tokens)
    except (ValueError, MalformedHeader) as exc:
        raise MalformedHeader(f"{source}: {exc}") from None
    if maxval != 255:
        raise MalformedHeader(f"{source}: maxval must be 255, got {maxval}")
    if width < 1 or height < 1:
        raise MalformedHeader(f"{source}: bad dimensions {width}x{height}")
    if len(data) - offset != width * height:
        raise MalformedHeader(
            f"{source}: expected {width * height} pixel bytes, found {len(data) - offset}"
        )
    values = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=offset)
    bad = (values != 0) & (values != 1) & (values != 255)
    if np.any(bad):
        raise LabelViolation(f"{source}: contains gray value {int(values[bad][0])}")
    return LabelMap(values.reshape(height, width).copy())


def write_query_sets(destination, anomalous: QueryIndexSet, inliers: QueryIndexSet, ious=None):
    """Write the query-set sidecar: mined anomalous indices (with their
    average IoUs, when known) and preset inlier indices."""
    entries = []
    for pos, q in enumerate(anomalous):
        entry = {"index": int(q)}
        if ious is not None:
            entry["avg_iou"] = float(ious[pos])
        entries.append(entry)
    doc = {
        "schema": QUERY_SET_SCHEMA,
        "anomalous": entries,
        "inliers": [int(q) for q in inliers],
    }
    _atomic_write_bytes(destination, (json.dumps(doc, indent=2) + "\n").encode("ascii"))


def read_query_sets(source):
    """Read a sidecar; returns (anomalous, inliers, ious or None)."""
    try:
        doc = json.loads(Path(source).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"{source}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != QUERY_SET_SCHEMA:
        raise MalformedHeader(f"{source}: expected schema {QUERY_SET_SCHEMA!r}")
    entries = doc.get("anomalous", [])
    anomalous = QueryIndexSet(tuple(int(e["index"]) for e in entries))
    ious = [e.get("avg_iou") for e in entries]
    if any(v is None for v in ious):
        ious = None
    inliers = QueryIndexSet(tuple(int(q) for q in doc.get("inliers", [])))
    return anomalous, inliers, ious


def write_report(destination, values: dict):
    """Write a metrics report as plain `key value` lines."""
    lines = ["schema maskomaly/metrics-report@1"]
    for key, value in values.items():
        if isinstance(value, float):
            lines.append(f"{key} {value:.9g}")
        else:
            lines.append(f"{key} {value}")
    _atomic_write_bytes(destination, ("\n".join(lines) + "\n").encode("ascii"))


def read_report(source) -> dict:
    out = {}
    for line in Path(source).read_text().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" ")
        out[key] = value
    return out


def write_table(destination, columns, rows):
    """Write a tab-separated table (for PR/ROC curves and study sweeps)."""
    lines = ["\t".join(columns)]
    for row in rows:
        lines.append("\t".join(f"{v:.9g}" if isinstance(v, float) else str(v) for v in row))
    _atomic_write_bytes(destination, ("\n".join(lines) + "\n").encode("ascii"))
