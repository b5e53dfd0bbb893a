# Core image / mask / box types and the conversions between them.
#
# Array conventions used across the whole package:
#   RgbImage      (H, W, 3) uint8, row-major, sRGB
#   BinaryMask    (H, W)    uint8, values in {0, 1}, 1 = foreground
#   SuperpixelMap (H, W)    int32, non-negative segment ids
# All internal math is (row=y, col=x); box coordinates are inclusive on
# both ends.

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, TypeAlias

import numpy as np
from scipy import ndimage

from .errors import ValidationError

RgbImage: TypeAlias = np.ndarray
BinaryMask: TypeAlias = np.ndarray
SuperpixelMap: TypeAlias = np.ndarray

# 4-connectivity structuring element shared by every component operation.
FOUR_CONNECTED = np.array([[0, 1, 0],
                           [1, 1, 1],
                           [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle in pixel coordinates, inclusive on both ends."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise ValidationError(f"BoundingBox.{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.x_min > self.x_max:
            raise ValidationError(f"BoundingBox x_min {self.x_min} > x_max {self.x_max}")
        if self.y_min > self.y_max:
            raise ValidationError(f"BoundingBox y_min {self.y_min} > y_max {self.y_max}")

    def validate_for(self, width: int, height: int) -> None:
        if self.x_min < 0:
            raise ValidationError(f"box x_min {self.x_min} < 0")
        if self.y_min < 0:
            raise ValidationError(f"box y_min {self.y_min} < 0")
        if self.x_max >= width:
            raise ValidationError(f"box x_max {self.x_max} >= image width {width}")
        if self.y_max >= height:
            raise ValidationError(f"box y_max {self.y_max} >= image height {height}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_list(self) -> List[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def ensure_rgb_image(image: np.ndarray) -> RgbImage:
    """Validate (H, W, 3) uint8 image; returns the array unchanged."""
    if not isinstance(image, np.ndarray):
        raise ValidationError(f"image must be a numpy array, got {type(image).__name__}")
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"image must have shape (H, W, 3), got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ValidationError(f"image must be at least 1x1, got {image.shape}")
    if image.dtype != np.uint8:
        raise ValidationError(f"image dtype must be uint8, got {image.dtype}")
    return image


def ensure_binary_mask(mask: np.ndarray) -> BinaryMask:
    """Validate (H, W) uint8 mask with values in {0, 1}."""
    if not isinstance(mask, np.ndarray):
        raise ValidationError(f"mask must be a numpy array, got {type(mask).__name__}")
    if mask.ndim != 2:
        raise ValidationError(f"mask must be 2D, got shape {mask.shape}")
    if mask.shape[0] < 1 or mask.shape[1] < 1:
        raise ValidationError(f"mask must be at least 1x1, got {mask.shape}")
    if mask.dtype != np.uint8:
        raise ValidationError(f"mask dtype must be uint8, got {mask.dtype}")
    if mask.size and int(mask.max(initial=0)) > 1:
        raise ValidationError(f"mask values must be in {{0,1}}, found max {int(mask.max())}")
    return mask


def ensure_superpixel_map(labels: np.ndarray, *, contiguous: bool = False) -> SuperpixelMap:
    """Validate a per-pixel segment label map.

    With contiguous=True additionally require the ids to be exactly 0..K-1.
    """
    if not isinstance(labels, np.ndarray):
        raise ValidationError(f"superpixel map must be a numpy array, got {type(labels).__name__}")
    if labels.ndim != 2:
        raise ValidationError(f"superpixel map must be 2D, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValidationError(f"superpixel map dtype must be integer, got {labels.dtype}")
    if labels.size and int(labels.min()) < 0:
        raise ValidationError("superpixel map contains negative labels")
    if contiguous:
        uniq = np.unique(labels)
        if uniq.size and not np.array_equal(uniq, np.arange(uniq.size)):
            raise ValidationError("superpixel labels are not contiguous 0..K-1")
    return labels


def ensure_same_shape(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise ValidationError(f"{what} have mismatched shapes {a.shape[:2]} vs {b.shape[:2]}")


# ----------------------------
# box <-> mask conversions
# ----------------------------

def bbox_to_mask(box: BoundingBox, width: int, height: int) -> BinaryMask:
    """Rasterise one inclusive rectangle into a {0,1} mask."""
    box.validate_for(width, height)
    mask = np.zeros((height, width), dtype=np.uint8)
    mask[box.y_min:box.y_max + 1, box.x_min:box.x_max + 1] = 1
    return mask


def boxes_to_mask(boxes: Sequence[BoundingBox], width: int, height: int) -> BinaryMask:
    """Union of several rectangles. Duplicates are harmless (pixelwise OR)."""
    mask = np.zeros((height, width), dtype=np.uint8)
    for box in boxes:
        box.validate_for(width, height)
        mask[box.y_min:box.y_max + 1, box.x_min:box.x_max + 1] = 1
    return mask


def mask_to_bboxes(mask: BinaryMask) -> List[BoundingBox]:
    """Tight box per 4-connected foreground component, sorted by (y_min, x_min)."""
    ensure_binary_mask(mask)
    labelled, n = ndimage.label(mask, structure=FOUR_CONNECTED)
    boxes = []
    for sl in ndimage.find_objects(labelled):
        if sl is None:
            continue
        ys, xs = sl
        boxes.append(BoundingBox(x_min=xs.start, y_min=ys.start,
                                 x_max=xs.stop - 1, y_max=ys.stop - 1))
    boxes.sort(key=lambda b: (b.y_min, b.x_min))
    return boxes


def mask_occupancy(box_mask: BinaryMask) -> float:
    """Foreground fraction of the image: popcount / (width * height)."""
    ensure_binary_mask(box_mask)
    return int(np.count_nonzero(box_mask)) / box_mask.size
