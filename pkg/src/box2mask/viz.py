"""Diagnostic renderings: superpixel boundaries, mask contours, marginals."""

from __future__ import annotations

from typing import Tuple

import numpy as np
from PIL import Image
from scipy import ndimage

from .types import (FOUR_CONNECTED, BinaryMask, RgbImage, SuperpixelMap,
                    ensure_binary_mask, ensure_rgb_image, ensure_same_shape)

Color = Tuple[int, int, int]


def boundary_pixels(labels: SuperpixelMap) -> np.ndarray:
    """Bool map of pixels whose right or lower neighbor has another label."""
    b = np.zeros(labels.shape, dtype=bool)
    b[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    b[:-1, :] |= labels[:-1, :] != labels[1:, :]
    return b


def mask_contour(mask: BinaryMask) -> np.ndarray:
    """Foreground pixels with at least one background 4-neighbor (or image edge)."""
    ensure_binary_mask(mask)
    inner = ndimage.binary_erosion(mask.astype(bool), structure=FOUR_CONNECTED,
                                   border_value=0)
    return mask.astype(bool) & ~inner


def overlay(image: RgbImage, labels: SuperpixelMap = None, mask: BinaryMask = None,
            boundary_color: Color = (255, 230, 0),
            contour_color: Color = (255, 0, 0)) -> RgbImage:
    """Paint superpixel boundaries and/or a mask contour over a copy of the image."""
    ensure_rgb_image(image)
    out = image.copy()
    if labels is not None:
        ensure_same_shape(image, labels, "image and superpixel map")
        out[boundary_pixels(labels)] = boundary_color
    if mask is not None:
        ensure_same_shape(image, mask, "image and mask")
        out[mask_contour(mask)] = contour_color
    return out


def save_probability_png(path, probs: np.ndarray) -> None:
    """Grayscale dump of per-pixel probabilities in [0, 1]."""
    p = np.asarray(probs, dtype=np.float64)
    gray = np.clip(np.rint(p * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(gray, mode="L").save(path, format="PNG")
