"""Batch export: per-image logit files in, bundles (and road maps) out.

Input files are .npz or .pt archives holding `mask_logits` (N, H', W'),
`class_logits` (N, C + 1), and optionally `sem_argmax` (H, W) for the
road-region map.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from .errors import ExportError
from .export import export_image, export_road_region


def _load_arrays(path: Path) -> dict:
    if path.suffix == ".npz":
        with np.load(path) as data:
            return {k: data[k] for k in data.files}
    if path.suffix == ".pt":
        data = torch.load(path, map_location="cpu", weights_only=True)
        return dict(data)
    raise ExportError(f"{path}: unsupported input format (use .npz or .pt)")


def _parse_size(text: str):
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise ExportError(f"--size must look like 720x1280, got {text!r}") from None


def run(args) -> int:
    in_dir = Path(args.input)
    files = sorted(list(in_dir.glob("*.npz")) + list(in_dir.glob("*.pt")))
    if not files:
        print(f"error: no .npz/.pt files in {in_dir}", file=sys.stderr)
        return 3
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    road_dir = Path(args.road_out) if args.road_out else None
    if road_dir:
        road_dir.mkdir(parents=True, exist_ok=True)
    size = _parse_size(args.size)
    road_classes = [int(c) for c in args.road_classes.split(",")] if args.road_classes else None

    for path in files:
        arrays = _load_arrays(path)
        try:
            mask_logits = arrays["mask_logits"]
            class_logits = arrays["class_logits"]
        except KeyError as exc:
            raise ExportError(f"{path}: missing array {exc}") from None
        export_image(mask_logits, class_logits, size, out_dir / (path.stem + ".mkio"))
        if road_dir:
            if road_classes is None:
                raise ExportError("--road-out requires --road-classes")
            if "sem_argmax" not in arrays:
                raise ExportError(f"{path}: no sem_argmax array for the road map")
            export_road_region(arrays["sem_argmax"], road_classes, road_dir / (path.stem + ".pgm"))
        print(f"exported {path.name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mkexport",
        description="Export mask-network logits as scoring-ready bundle files.",
    )
    parser.add_argument("--input", required=True, help="directory of .npz/.pt logit files")
    parser.add_argument("--output", required=True, help="directory for bundle files")
    parser.add_argument("--size", required=True, help="target HxW, e.g. 720x1280")
    parser.add_argument("--road-classes", default=None, help="comma-separated road class ids")
    parser.add_argument("--road-out", default=None, help="directory for road-region maps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
