"""File formats: mask / image PNGs, boxes JSON, dataset manifests.

Masks are single-channel PNGs with 0 = background and 255 = foreground.
Any other nonzero value is accepted on load, mapped to 1 with a warning.
Boxes are stored as JSON: {image_filename: [[x_min, y_min, x_max, y_max], ...]}.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from PIL import Image

from .errors import ConfigError, ValidationError
from .types import BinaryMask, BoundingBox, RgbImage, ensure_binary_mask, ensure_rgb_image


def load_image(path) -> RgbImage:
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        arr = np.asarray(rgb, dtype=np.uint8)
    return ensure_rgb_image(arr)


def save_image(path, image: RgbImage) -> None:
    ensure_rgb_image(image)
    Image.fromarray(image, mode="RGB").save(path, format="PNG")


def load_mask(path) -> BinaryMask:
    with Image.open(path) as im:
        if im.mode not in ("1", "L", "I", "I;16", "P"):
            raise ValidationError(
                f"{path}: mask must be single-channel, got mode {im.mode!r}")
        arr = np.asarray(im.convert("L"))
    values = np.unique(arr)
    odd = [int(v) for v in values if v not in (0, 255)]
    if odd:
        warnings.warn(f"{path}: non-binary mask values {odd[:8]} mapped to foreground")
    return (arr != 0).astype(np.uint8)


def save_mask(path, mask: BinaryMask) -> None:
    ensure_binary_mask(mask)
    Image.fromarray((mask * np.uint8(255)), mode="L").save(path, format="PNG")


# ----------------------------
# box annotations
# ----------------------------

def boxes_to_json_dict(boxes_by_image: Dict[str, Sequence[BoundingBox]]) -> dict:
    return {name: [b.as_list() for b in boxes] for name, boxes in boxes_by_image.items()}


def boxes_from_json_dict(raw: dict) -> Dict[str, List[BoundingBox]]:
    out: Dict[str, List[BoundingBox]] = {}
    for name, entries in raw.items():
        boxes = []
        for i, coords in enumerate(entries):
            if len(coords) != 4:
                raise ConfigError(f"box {i} for {name!r} must have 4 coordinates, got {coords}")
            boxes.append(BoundingBox(*[int(c) for c in coords]))
        out[name] = boxes
    return out


def save_boxes(path, boxes_by_image: Dict[str, Sequence[BoundingBox]]) -> None:
    with open(path, "w") as fh:
        json.dump(boxes_to_json_dict(boxes_by_image), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_boxes(path) -> Dict[str, List[BoundingBox]]:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: boxes file must be a JSON object")
    return boxes_from_json_dict(raw)


# ----------------------------
# dataset manifest
# ----------------------------

@dataclass
class ManifestEntry:
    image_path: Path
    gt_mask_path: Optional[Path] = None
    boxes: Optional[List[BoundingBox]] = None

    def __post_init__(self):
        if self.gt_mask_path is None and not self.boxes:
            raise ConfigError(
                f"manifest entry for {self.image_path} needs 'gt_mask' or 'boxes'")


@dataclass
class DatasetManifest:
    entries: List[ManifestEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def load_manifest(path) -> DatasetManifest:
    """Manifest: JSON list of {"image": ..., "gt_mask"?: ..., "boxes"?: [[...]]}.

    Relative paths are resolved against the manifest's directory.
    """
    path = Path(path)
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ConfigError(f"{path}: manifest must be a JSON list")
    base = path.parent
    entries = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "image" not in item:
            raise ConfigError(f"{path}: entry {i} must be an object with an 'image' key")
        image_path = _resolve(base, item["image"])
        gt = _resolve(base, item["gt_mask"]) if item.get("gt_mask") else None
        boxes = None
        if item.get("boxes") is not None:
            boxes = [BoundingBox(*[int(c) for c in coords]) for coords in item["boxes"]]
        entries.append(ManifestEntry(image_path=image_path, gt_mask_path=gt, boxes=boxes))
    return DatasetManifest(entries)


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p
