"""sRGB -> CIELAB conversion (D65 white point, 8-bit input).

Used by the superpixel clustering so that color distances are
perceptually meaningful. Output L is in [0, 100]; a/b roughly [-128, 127].
"""

from __future__ import annotations

import numpy as np

# sRGB -> XYZ matrix (linear light, D65)
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])

_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])

_DELTA = 6.0 / 29.0


def srgb_to_lab(image: np.ndarray) -> np.ndarray:
    """Convert (..., 3) uint8 sRGB to float64 CIELAB."""
    c = image.astype(np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    f = np.where(t > _DELTA ** 3, np.cbrt(t), t / (3 * _DELTA ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab
