"""Shared bits for the demo scripts: synthetic data and an output dir."""

from pathlib import Path

import numpy as np

OUT = Path(__file__).parent / "output"


def outdir(name):
    d = OUT / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def ellipse_scene(h=120, w=160, margin_y=16, margin_x=20, seed=0,
                  fg=(200, 60, 50), bg=(40, 60, 160), noise=6):
    """A high-contrast ellipse inscribed in its bounding box, plus GT mask."""
    rng = np.random.default_rng(seed)
    cy, cx = h // 2, w // 2
    ry, rx = cy - margin_y, cx - margin_x
    yy, xx = np.mgrid[0:h, 0:w]
    gt = ((((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2) <= 1.0).astype(np.uint8)
    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = bg
    img[gt.astype(bool)] = fg
    img += rng.integers(-noise, noise + 1, img.shape)
    return np.clip(img, 0, 255).astype(np.uint8), gt
