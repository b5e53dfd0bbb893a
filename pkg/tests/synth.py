"""Synthetic image generators shared by pipeline and acceptance tests.

Everything is seeded and deterministic. Objects are high-contrast
against the background so superpixel boundaries and the CRF color
kernel have something to lock onto, with mild pixel noise so the
images are not degenerate single-color regions.
"""

from __future__ import annotations

import numpy as np

FG_COLOR = (200, 60, 50)
BG_COLOR = (40, 60, 160)


def ellipse_mask(h, w, cy, cx, ry, rx):
    yy, xx = np.mgrid[0:h, 0:w]
    return ((((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2) <= 1.0).astype(np.uint8)


def render(mask, fg=FG_COLOR, bg=BG_COLOR, noise=6, seed=0, gradient=0.0):
    """Colorize a binary mask with optional illumination gradient and noise."""
    rng = np.random.default_rng(seed)
    h, w = mask.shape
    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = bg
    img[mask.astype(bool)] = fg
    if gradient:
        ramp = gradient * np.linspace(-1.0, 1.0, w)[None, :, None]
        img = img * (1.0 + ramp)
    img += rng.integers(-noise, noise + 1, img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def inscribed_ellipse_case(h=120, w=160, margin_y=18, margin_x=22, seed=0, **render_kw):
    """Axis-aligned ellipse inscribed in its tight bounding box.

    The tight box of the ellipse is exactly the inscribing rectangle, so
    IoU(box, ellipse) = (pi * ry * rx) / (4 * ry * rx) = pi / 4 up to
    rasterization.
    """
    cy, cx = h // 2, w // 2
    ry, rx = cy - margin_y, cx - margin_x
    gt = ellipse_mask(h, w, cy, cx, ry, rx)
    return render(gt, seed=seed, **render_kw), gt


def blob_case(h=120, w=160, n_lobes=3, seed=0, **render_kw):
    """Union of a few overlapping ellipses: an irregular single object."""
    rng = np.random.default_rng(seed)
    gt = np.zeros((h, w), dtype=np.uint8)
    cy, cx = h // 2, w // 2
    for _ in range(n_lobes):
        oy = int(rng.integers(-h // 8, h // 8 + 1))
        ox = int(rng.integers(-w // 8, w // 8 + 1))
        ry = int(rng.integers(h // 6, h // 3))
        rx = int(rng.integers(w // 6, w // 3))
        gt |= ellipse_mask(h, w, cy + oy, cx + ox, ry, rx)
    return render(gt, seed=seed + 1, **render_kw), gt


def shrink_suite(n_ellipses=8, n_blobs=12, seed0=100):
    """The benchmark suite: inscribed ellipses plus irregular blobs."""
    cases = []
    for i in range(n_ellipses):
        img, gt = inscribed_ellipse_case(
            margin_y=14 + 2 * (i % 3), margin_x=18 + 3 * (i % 4),
            seed=seed0 + i, gradient=0.05 * (i % 2))
        cases.append(("ellipse", img, gt))
    for i in range(n_blobs):
        img, gt = blob_case(n_lobes=2 + i % 3, seed=seed0 + 50 + i,
                            gradient=0.05 * (i % 2))
        cases.append(("blob", img, gt))
    return cases
