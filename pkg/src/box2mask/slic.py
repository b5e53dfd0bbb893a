"""Superpixel generation by localized k-means in (l, a, b, y, x) space.

The clustering distance is D = sqrt(d_color^2 + (m/S)^2 * d_spatial^2)
with S = sqrt(area / max_segments) the grid interval and m the
compactness weight. Centers start on a regular grid, are nudged to the
lowest-gradient pixel of their 3x3 neighborhood, and each assignment
pass only searches a window of roughly 2S x 2S around every center.

Everything here is deterministic: no RNG, ties always resolve to the
lowest label id, and the final map is relabelled 0..K-1 in row-major
first-occurrence order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from .color import srgb_to_lab
from .errors import ParameterError
from .types import (FOUR_CONNECTED, BoundingBox, RgbImage, SuperpixelMap,
                    ensure_rgb_image)


@dataclass(frozen=True)
class SlicParams:
    max_segments: int = 200
    compactness: float = 10.0
    max_iterations: int = 10
    enforce_connectivity: bool = True
    min_segment_fraction: float = 0.25

    def __post_init__(self):
        if self.max_segments < 1:
            raise ParameterError(f"max_segments must be >= 1, got {self.max_segments}")
        if not self.compactness > 0:
            raise ParameterError(f"compactness must be > 0, got {self.compactness}")
        if self.max_iterations < 1:
            raise ParameterError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not 0.0 < self.min_segment_fraction < 1.0:
            raise ParameterError(
                f"min_segment_fraction must be in (0, 1), got {self.min_segment_fraction}")


def slic_segment(image: RgbImage, params: SlicParams) -> SuperpixelMap:
    """Partition the image into at most params.max_segments superpixels."""
    ensure_rgb_image(image)
    h, w = image.shape[:2]
    s = params.max_segments
    if s > h * w:
        raise ParameterError(f"max_segments {s} exceeds pixel count {h * w}")

    lab = srgb_to_lab(image)
    grid = float(np.sqrt(h * w / s))

    centers = _init_centers(lab, s, grid)
    labels = _kmeans_passes(lab, centers, grid, params)

    if params.enforce_connectivity:
        threshold = params.min_segment_fraction * (h * w / s)
        labels = _enforce_connectivity(labels, threshold, s)
    return _relabel_row_major(labels)


def _init_centers(lab: np.ndarray, s: int, grid: float) -> np.ndarray:
    """Grid-seeded (l, a, b, y, x) centers, perturbed off high-gradient pixels."""
    h, w = lab.shape[:2]
    nx = min(s, max(1, int(w / grid)))
    ny = max(1, min(s // nx, max(1, int(h / grid))))

    gy0, gx0 = np.gradient(lab[..., 0])
    gy1, gx1 = np.gradient(lab[..., 1])
    gy2, gx2 = np.gradient(lab[..., 2])
    grad = gx0 ** 2 + gy0 ** 2 + gx1 ** 2 + gy1 ** 2 + gx2 ** 2 + gy2 ** 2

    centers = np.empty((ny * nx, 5), dtype=np.float64)
    k = 0
    for j in range(ny):
        cy = int((j + 0.5) * h / ny)
        for i in range(nx):
            cx = int((i + 0.5) * w / nx)
            cy_p, cx_p = _perturb(grad, cy, cx)
            centers[k] = (lab[cy_p, cx_p, 0], lab[cy_p, cx_p, 1], lab[cy_p, cx_p, 2],
                          float(cy_p), float(cx_p))
            k += 1
    return centers


def _perturb(grad: np.ndarray, cy: int, cx: int) -> Tuple[int, int]:
    """Move to the strictly lowest-gradient pixel in the 3x3 neighborhood.

    The seed itself is inspected first, so a flat neighborhood leaves the
    center where the grid put it.
    """
    h, w = grad.shape
    best = (cy, cx)
    best_g = grad[cy, cx]
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            y, x = cy + dy, cx + dx
            if 0 <= y < h and 0 <= x < w and grad[y, x] < best_g:
                best_g = grad[y, x]
                best = (y, x)
    return best


def _kmeans_passes(lab: np.ndarray, centers: np.ndarray, grid: float,
                   params: SlicParams) -> np.ndarray:
    h, w = lab.shape[:2]
    ratio2 = (params.compactness / grid) ** 2
    radius = int(np.ceil(grid)) + 1
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)

    labels = np.full((h, w), -1, dtype=np.int32)
    prev = None
    yy, xx = np.mgrid[0:h, 0:w]
    channels = (lab[..., 0], lab[..., 1], lab[..., 2], yy, xx)
    for _ in range(params.max_iterations):
        dist2 = np.full((h, w), np.inf, dtype=np.float64)
        labels.fill(-1)
        for k in range(centers.shape[0]):
            cl, ca, cb, cy, cx = centers[k]
            y0 = max(0, int(cy) - radius)
            y1 = min(h, int(cy) + radius + 1)
            x0 = max(0, int(cx) - radius)
            x1 = min(w, int(cx) + radius + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            win = lab[y0:y1, x0:x1]
            d_col = ((win[..., 0] - cl) ** 2 + (win[..., 1] - ca) ** 2
                     + (win[..., 2] - cb) ** 2)
            d_sp = ((ys[y0:y1, None] - cy) ** 2 + (xs[None, x0:x1] - cx) ** 2)
            d2 = d_col + ratio2 * d_sp
            better = d2 < dist2[y0:y1, x0:x1]
            dist2[y0:y1, x0:x1][better] = d2[better]
            labels[y0:y1, x0:x1][better] = k

        _assign_orphans(labels, centers)
        if prev is not None and np.array_equal(labels, prev):
            break
        prev = labels.copy()
        _update_centers(channels, labels, centers)
    return labels


def _assign_orphans(labels: np.ndarray, centers: np.ndarray) -> None:
    """Pixels missed by every search window go to the spatially nearest center."""
    miss = np.argwhere(labels < 0)
    if miss.size == 0:
        return
    d = ((miss[:, 0:1] - centers[None, :, 3]) ** 2
         + (miss[:, 1:2] - centers[None, :, 4]) ** 2)
    labels[miss[:, 0], miss[:, 1]] = np.argmin(d, axis=1)


def _update_centers(channels, labels: np.ndarray, centers: np.ndarray) -> None:
    k = centers.shape[0]
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=k).astype(np.float64)
    occupied = counts > 0
    for c, values in enumerate(channels):
        sums = np.bincount(flat, weights=values.ravel().astype(np.float64), minlength=k)
        centers[occupied, c] = sums[occupied] / counts[occupied]


def _enforce_connectivity(labels: np.ndarray, min_size: float, s: int) -> np.ndarray:
    """Split disconnected clusters, absorb fragments below min_size, cap at s labels.

    Merge target is always the 4-adjacent segment sharing the longest
    border (ties to the lowest label id), which keeps every merged
    segment 4-connected.
    """
    h, w = labels.shape
    seg = np.full((h, w), -1, dtype=np.int32)
    next_id = 0
    objects = ndimage.find_objects(labels + 1)
    for k, sl in enumerate(objects):
        if sl is None:
            continue
        sub = labels[sl] == k
        comp, n = ndimage.label(sub, structure=FOUR_CONNECTED)
        view = seg[sl]
        view[sub] = comp[sub] - 1 + next_id
        next_id += n

    sizes = np.bincount(seg.ravel(), minlength=next_id)
    boxes = {i: sl for i, sl in enumerate(ndimage.find_objects(seg + 1)) if sl is not None}
    alive = {i for i in range(next_id) if sizes[i] > 0}

    def merge_one(cand: int) -> None:
        sl = boxes[cand]
        pad = (slice(max(0, sl[0].start - 1), min(h, sl[0].stop + 1)),
               slice(max(0, sl[1].start - 1), min(w, sl[1].stop + 1)))
        window = seg[pad]
        m = window == cand
        border: dict[int, int] = {}
        for neighbors in _adjacent_values(window, m):
            for nb, cnt in zip(*np.unique(neighbors, return_counts=True)):
                border[int(nb)] = border.get(int(nb), 0) + int(cnt)
        if not border:
            return
        longest = max(border.values())
        target = min(nb for nb, cnt in border.items() if cnt == longest)
        window[m] = target
        sizes[target] += sizes[cand]
        sizes[cand] = 0
        alive.discard(cand)
        heapq.heappush(heap, (int(sizes[target]), target))
        tb = boxes[target]
        boxes[target] = (slice(min(tb[0].start, sl[0].start), max(tb[0].stop, sl[0].stop)),
                         slice(min(tb[1].start, sl[1].start), max(tb[1].stop, sl[1].stop)))

    # smallest-first queue; stale entries (merged away or resized) are skipped
    heap = [(int(sizes[i]), i) for i in alive]
    heapq.heapify(heap)

    def pop_smallest() -> int | None:
        while heap:
            size, i = heapq.heappop(heap)
            if i in alive and sizes[i] == size:
                return i
        return None

    while len(alive) > 1:
        cand = pop_smallest()
        if cand is None or sizes[cand] >= min_size:
            if cand is not None:
                heapq.heappush(heap, (int(sizes[cand]), cand))
            break
        merge_one(cand)

    while len(alive) > s:
        cand = pop_smallest()
        if cand is None:
            break
        merge_one(cand)

    return seg


def _adjacent_values(window: np.ndarray, m: np.ndarray):
    """Yield the labels 4-adjacent to the masked region, one array per side."""
    yield window[1:, :][m[:-1, :] & ~m[1:, :]]
    yield window[:-1, :][m[1:, :] & ~m[:-1, :]]
    yield window[:, 1:][m[:, :-1] & ~m[:, 1:]]
    yield window[:, :-1][m[:, 1:] & ~m[:, :-1]]


def _relabel_row_major(labels: np.ndarray) -> SuperpixelMap:
    flat = labels.ravel()
    uniq, first = np.unique(flat, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(int(uniq.max()) + 1, dtype=np.int32)
    remap[uniq[order]] = np.arange(uniq.size, dtype=np.int32)
    return remap[labels]


@dataclass(frozen=True)
class SegmentStats:
    label: int
    pixel_count: int
    centroid: Tuple[float, float]  # (y, x)
    bbox: BoundingBox


def segment_stats(labels: SuperpixelMap) -> List[SegmentStats]:
    """Per-segment pixel count, centroid and tight bounding rectangle."""
    h, w = labels.shape
    flat = labels.ravel()
    k = int(flat.max()) + 1
    counts = np.bincount(flat, minlength=k)
    yy, xx = np.mgrid[0:h, 0:w]
    ysum = np.bincount(flat, weights=yy.ravel().astype(np.float64), minlength=k)
    xsum = np.bincount(flat, weights=xx.ravel().astype(np.float64), minlength=k)
    stats = []
    for label, sl in enumerate(ndimage.find_objects(labels + 1)):
        if sl is None:
            continue
        n = int(counts[label])
        stats.append(SegmentStats(
            label=label,
            pixel_count=n,
            centroid=(ysum[label] / n, xsum[label] / n),
            bbox=BoundingBox(x_min=sl[1].start, y_min=sl[0].start,
                             x_max=sl[1].stop - 1, y_max=sl[0].stop - 1),
        ))
    return stats
