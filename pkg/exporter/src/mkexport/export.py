"""Turn raw per-query model outputs into scoring-ready artifacts.

Masks: logits are bilinearly upsampled to the target size first, then
squashed with a sigmoid (matching how mask decoders are usually run at
inference). Class logits get a softmax. Everything is stored as float32.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .errors import NonFiniteLogits, ShapeMismatch, UnknownClassList
from .mkio_write import write_bundle, write_graymap


def _to_tensor(arr, name: str) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(arr) if not isinstance(arr, torch.Tensor) else arr)
    t = t.detach().to(torch.float32)
    if not torch.isfinite(t).all():
        raise NonFiniteLogits(f"{name} contains NaN or infinite values")
    return t


def activate_outputs(mask_logits, class_logits, target_size):
    """(sigmoid(upsampled mask logits), softmax(class logits)) as numpy f32."""
    masks = _to_tensor(mask_logits, "mask logits")
    classes = _to_tensor(class_logits, "class logits")
    if masks.ndim != 3:
        raise ShapeMismatch(f"mask logits must be (N, H', W'), got {tuple(masks.shape)}")
    if classes.ndim != 2 or classes.shape[1] < 1:
        raise ShapeMismatch(f"class logits must be (N, C + 1), got {tuple(classes.shape)}")
    if masks.shape[0] != classes.shape[0]:
        raise ShapeMismatch(
            f"mask logits have N={masks.shape[0]} but class logits have N={classes.shape[0]}"
        )
    h, w = int(target_size[0]), int(target_size[1])
    if h < 1 or w < 1:
        raise ShapeMismatch(f"target size {target_size} must be positive")
    if (masks.shape[1], masks.shape[2]) != (h, w):
        masks = F.interpolate(
            masks.unsqueeze(0), size=(h, w), mode="bilinear", align_corners=False
        ).squeeze(0)
    memberships = torch.sigmoid(masks).numpy().astype(np.float32)
    rows = torch.softmax(classes, dim=-1).numpy().astype(np.float32)
    return memberships, rows


def export_image(mask_logits, class_logits, target_size, destination):
    """Activate one image's outputs and write them as a bundle file."""
    memberships, rows = activate_outputs(mask_logits, class_logits, target_size)
    write_bundle(memberships, rows, destination)
    return memberships, rows


def road_region(semantic_pred, road_classes) -> np.ndarray:
    """Binary map of pixels whose predicted class is road/ground-like."""
    pred = np.asarray(semantic_pred)
    if pred.ndim != 2:
        raise ShapeMismatch(f"semantic prediction must be (H, W), got {pred.shape}")
    ids = [int(c) for c in road_classes]
    if not ids:
        raise UnknownClassList("road class list is empty")
    if any(c < 0 for c in ids):
        raise UnknownClassList(f"negative class id in {ids}")
    out = np.isin(pred, ids).astype(np.uint8)
    return out


def export_road_region(semantic_pred, road_classes, destination) -> np.ndarray:
    region = road_region(semantic_pred, road_classes)
    write_graymap(region, destination)
    return region
