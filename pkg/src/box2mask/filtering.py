"""Fast Gaussian filtering primitives for mean-field message passing.

Two kernels are needed, both unnormalized:

  spatial    k(i,j) = exp(-|p_i - p_j|^2 / (2 sxy^2))
  bilateral  k(i,j) = exp(-|p_i - p_j|^2 / (2 sxy^2) - |c_i - c_j|^2 / (2 srgb^2))

The spatial kernel is separable, so a truncated 1D convolution per axis
is exact up to the 4-sigma cutoff. The bilateral kernel is approximated
by splatting pixels onto a feature-space grid with B-spline weights,
smoothing, and slicing back; BilateralGrid picks one of three engines
for the same operator, trading accuracy against throughput by size:

  - color planes (tiny inputs): only the color axes are gridded; each
    occupied color cell keeps a full-resolution image plane that is
    convolved exactly, and slicing evaluates the variance-compensated
    color Gaussian at the true color offsets. Worst-case kernel error
    is around 1e-3 of the message scale, which the dense mean-field
    comparisons rely on.
  - dense 5D grid (small inputs): quadratic B-spline splat/slice over
    (y, x, r, g, b), blur via dense separable convolution over the
    grid's bounding box, variance-compensated taps.
  - sparse 5D grid (production inputs): same operator, but cells live
    in a sorted sparse list and the blur only propagates through
    occupied cells. Mass that would travel through empty cells is
    dropped; that is negligible when pixels populate feature space
    densely, which holds for real images at linear order / half-sigma
    cells.

All engines report their true per-pixel self coupling (self_weight) so
callers can subtract the self term instead of assuming k(i,i) = 1.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import convolve1d

from .errors import ParameterError
from .types import RgbImage, ensure_rgb_image

# engine selection bounds (pixel counts)
MAX_PLANES_PIXELS = 320
MAX_DENSE_PIXELS = 65536
# dense storage bound: cells * 8 bytes, kept well under typical RAM
MAX_DENSE_CELLS = 12_000_000
# sparse cell bound before the grid coarsens itself
MAX_SPARSE_CELLS = 700_000

# per-dim B-spline variance; each interpolation pass adds this much
_SPLINE_VAR = {1: 1.0 / 6.0, 2: 1.0 / 4.0}


def gaussian_taps(sigma: float, truncate: float = 4.0) -> np.ndarray:
    """Symmetric unnormalized Gaussian taps exp(-k^2 / 2 sigma^2)."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    radius = int(np.ceil(truncate * sigma))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    return np.exp(-(k ** 2) / (2.0 * sigma * sigma))


def gaussian_filter_2d(field: np.ndarray, sigma: float) -> np.ndarray:
    """Unnormalized Gaussian smoothing of (H, W, ...) along the two image axes.

    Zero padding outside the image, matching a plain sum over existing
    pixels. Includes the self term (central tap is 1).
    """
    taps = gaussian_taps(sigma)
    out = convolve1d(field, taps, axis=0, mode="constant", cval=0.0)
    out = convolve1d(out, taps, axis=1, mode="constant", cval=0.0)
    return out


def _spline_nodes(coords: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Node indices (n, order+1) and weights for one feature dimension."""
    if order == 1:
        base = np.floor(coords).astype(np.int64)
        frac = coords - base
        nodes = base[:, None] + np.array([0, 1])
        weights = np.stack([1.0 - frac, frac], axis=1)
    else:
        base = np.floor(coords - 0.5).astype(np.int64)
        t = coords - base  # in [0.5, 1.5)
        w0 = 0.5 * (1.5 - t) ** 2
        w1 = 0.75 - (t - 1.0) ** 2
        w2 = 0.5 * (t - 0.5) ** 2
        nodes = base[:, None] + np.array([0, 1, 2])
        weights = np.stack([w0, w1, w2], axis=1)
    return nodes, weights


def _cartesian_cells(dim_nodes, dim_weights, strides, pad,
                     key_dtype=np.int64) -> Tuple[np.ndarray, np.ndarray]:
    """Combine per-dim nodes/weights into flat keys and product weights."""
    n = dim_nodes[0].shape[0]
    keys = np.zeros((n, 1), dtype=key_dtype)
    weights = np.ones((n, 1), dtype=np.float64)
    for d in range(len(dim_nodes)):
        nd = ((dim_nodes[d][:, None, :] + pad) * strides[d]).astype(key_dtype)
        keys = (keys[:, :, None] + nd).reshape(n, -1)
        weights = (weights[:, :, None] * dim_weights[d][:, None, :]).reshape(n, -1)
    return keys, weights


def _sorted_unique(values: np.ndarray) -> np.ndarray:
    s = np.sort(values)
    return s[np.concatenate([[True], s[1:] != s[:-1]])]


class _PlanesEngine:
    """Color-gridded, spatially exact bilateral filter for tiny images."""

    def __init__(self, image, sigma_xy, sigma_rgb, color_scale):
        h, w = image.shape[:2]
        n = h * w
        self.shape = (h, w)
        self._sigma_xy = sigma_xy
        sigma_cell = 1.0 / color_scale
        var_g = sigma_cell ** 2 - _SPLINE_VAR[2]  # one quadratic splat pass
        if var_g <= 0:
            raise ParameterError(f"color grid scale {color_scale} too coarse")

        colors = image.reshape(n, 3).astype(np.float64) / (sigma_rgb * color_scale)
        dim_nodes, dim_weights = [], []
        mins = []
        for d in range(3):
            nodes, weights = _spline_nodes(colors[:, d], 2)
            mins.append(nodes.min())
            dim_nodes.append(nodes - nodes.min())
            dim_weights.append(weights)
        dims = np.array([nd.max() + 1 for nd in dim_nodes], dtype=np.int64)
        strides = np.array([dims[1] * dims[2], dims[2], 1], dtype=np.int64)
        keys, weights = _cartesian_cells(dim_nodes, dim_weights, strides, pad=0)

        uniq = _sorted_unique(keys.ravel())
        self._m = m = uniq.size
        self._cell_of = np.searchsorted(uniq, keys.ravel())
        self._splat_w = weights
        self._n_corners = weights.shape[1]

        centers = np.stack(np.unravel_index(uniq, tuple(dims)), axis=1).astype(np.float64)
        centers += np.array(mins, dtype=np.float64)
        # exact slice kernel against every occupied color cell, unit peak
        amp = (sigma_cell / np.sqrt(var_g)) ** 3
        d2 = ((colors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        self._slice_w = amp * np.exp(-d2 / (2.0 * var_g))

        own = self._slice_w[np.arange(n)[:, None], self._cell_of.reshape(n, -1)]
        self.self_weight = (own * weights).sum(axis=1).reshape(h, w)

    def filter1(self, flat: np.ndarray) -> np.ndarray:
        h, w = self.shape
        n = h * w
        contrib = (self._splat_w * flat[:, None]).ravel()
        pix = np.repeat(np.arange(n), self._n_corners)
        planes = np.bincount(self._cell_of * n + pix, weights=contrib,
                             minlength=self._m * n).reshape(self._m, h, w)
        taps = gaussian_taps(self._sigma_xy)
        planes = convolve1d(planes, taps, axis=1, mode="constant", cval=0.0)
        planes = convolve1d(planes, taps, axis=2, mode="constant", cval=0.0)
        return (self._slice_w * planes.reshape(self._m, n).T).sum(axis=1)


class _GridEngine:
    """5D grid engine; dense bounding-box blur or sparse occupied-cell blur.

    Extremely incoherent inputs (per-pixel color noise) can occupy one
    cell per pixel corner; when the sparse cell count would blow past
    MAX_SPARSE_CELLS the constructor coarsens the grid and retries, so
    memory and blur cost stay bounded at some accuracy cost on inputs
    that are noise-dominated anyway.
    """

    def __init__(self, image, sigma_xy, sigma_rgb, grid_scale, order,
                 allow_dense: bool = True, _attempt: int = 0):
        h, w = image.shape[:2]
        n = h * w
        self.shape = (h, w)
        self._allow_dense = allow_dense
        sigma_cell = 1.0 / grid_scale
        var_blur = sigma_cell ** 2 - 2.0 * _SPLINE_VAR[order]
        if var_blur <= 0.0:
            raise ParameterError(f"grid_scale {grid_scale} too coarse for order {order}")

        feats = np.empty((n, 5), dtype=np.float64)
        yy, xx = np.mgrid[0:h, 0:w]
        feats[:, 0] = yy.ravel() / (sigma_xy * grid_scale)
        feats[:, 1] = xx.ravel() / (sigma_xy * grid_scale)
        feats[:, 2:] = image.reshape(n, 3).astype(np.float64) / (sigma_rgb * grid_scale)

        dim_nodes, dim_weights = [], []
        extent = np.empty(5, dtype=np.int64)
        for d in range(5):
            nodes, weights = _spline_nodes(feats[:, d], order)
            nodes -= nodes.min()
            extent[d] = nodes.max() + 1
            dim_nodes.append(nodes)
            dim_weights.append(weights)

        self._dense = allow_dense and bool(np.prod(extent) <= MAX_DENSE_CELLS)
        # the dense box blur is exact within the box; the sparse blur drops
        # mass through empty cells, so a shorter tail buys speed not accuracy
        truncate = 4.0 if self._dense else 3.0
        radius = max(1, int(np.ceil(truncate * np.sqrt(var_blur))))
        taps = np.exp(-np.arange(radius + 1, dtype=np.float64) ** 2 / (2.0 * var_blur))
        # unit-peak correction: effective kernel mass must match sqrt(2 pi) sigma_cell
        taps *= np.sqrt(2.0 * np.pi) * sigma_cell / (taps[0] + 2.0 * taps[1:].sum())
        self._taps = taps
        self._radius = radius

        pad = 0 if self._dense else radius
        dims = extent + 2 * pad
        strides = np.empty(5, dtype=np.int64)
        strides[4] = 1
        for d in range(3, -1, -1):
            strides[d] = strides[d + 1] * dims[d + 1]
        self._dims = tuple(int(v) for v in dims)

        key_dtype = np.int32 if int(np.prod(dims)) < 2 ** 31 else np.int64
        keys, weights = _cartesian_cells(dim_nodes, dim_weights, strides, pad, key_dtype)
        self._n_corners = keys.shape[1]
        self._weights = weights
        self._weights32 = weights.astype(np.float32)

        if self._dense:
            self._corner_cell = keys.ravel().astype(np.int64)
            self._n_cells = int(np.prod(dims))
        else:
            uniq = _sorted_unique(keys.ravel())
            if uniq.size > MAX_SPARSE_CELLS and _attempt < 3:
                self.__init__(image, sigma_xy, sigma_rgb,
                              min(1.0, grid_scale * 1.4), order,
                              allow_dense=_attempt >= 1, _attempt=_attempt + 1)
                return
            self._n_cells = m = uniq.size
            self._corner_cell = np.searchsorted(uniq, keys.ravel()).astype(np.int32)
            # neighbor tables: cell index at +/- o along each dim, sentinel m = empty
            self._plus = np.empty((5, radius, m), dtype=np.int32)
            self._minus = np.empty((5, radius, m), dtype=np.int32)
            for d in range(5):
                step = key_dtype(strides[d])
                for o in range(1, radius + 1):
                    self._plus[d, o - 1] = _locate(uniq, uniq + key_dtype(o) * step, m)
                    self._minus[d, o - 1] = _locate(uniq, uniq - key_dtype(o) * step, m)

        self._splat_buf = np.empty_like(weights)
        self._last_flat = None
        self._last_cells = None

        # exact self coupling of the grid, per pixel, separable over dims
        sw = np.ones(n, dtype=np.float64)
        for d in range(5):
            wd = dim_weights[d]
            acc = np.zeros(n, dtype=np.float64)
            k = wd.shape[1]
            for i in range(k):
                for j in range(k):
                    acc += wd[:, i] * wd[:, j] * taps[abs(i - j)]
            sw *= acc
        self.self_weight = sw.reshape(h, w)

    def filter1(self, flat: np.ndarray) -> np.ndarray:
        n = flat.size
        cells = self._splat(flat)
        if self._dense:
            blurred = self._blur_dense(cells)
            gathered = blurred[self._corner_cell].reshape(n, self._n_corners)
            return np.einsum("nc,nc->n", gathered, self._weights)
        # float32 slice: the sparse path's approximation error dwarfs fp32
        blurred = self._blur_sparse(cells).astype(np.float32)
        gathered = blurred[self._corner_cell].reshape(n, self._n_corners)
        return np.einsum("nc,nc->n", gathered, self._weights32).astype(np.float64)

    def _splat(self, flat: np.ndarray) -> np.ndarray:
        """Splatted cell masses; incremental when the field barely changed.

        Mean-field marginals saturate, so successive fields differ on a
        shrinking pixel set; splatting only the delta is linear algebraic
        identity, not an approximation.
        """
        n = flat.size
        corners = self._n_corners
        if self._last_flat is not None:
            delta = flat - self._last_flat
            changed = np.flatnonzero(delta)
            if changed.size < 0.35 * n:
                if changed.size:
                    idx = (changed[:, None] * corners + np.arange(corners)).ravel()
                    cc = self._corner_cell.ravel()[idx]
                    contrib = self._weights[changed] * delta[changed, None]
                    update = np.bincount(cc, weights=contrib.ravel(),
                                         minlength=self._n_cells)
                    cells = self._last_cells + update
                else:
                    cells = self._last_cells
                self._last_flat = flat.copy()
                self._last_cells = cells
                return cells
        contrib = np.multiply(self._weights, flat[:, None], out=self._splat_buf)
        cells = np.bincount(self._corner_cell, weights=contrib.ravel(),
                            minlength=self._n_cells)
        self._last_flat = flat.copy()
        self._last_cells = cells
        return cells

    def _blur_dense(self, cells: np.ndarray) -> np.ndarray:
        grid = cells.reshape(self._dims)
        full = np.concatenate([self._taps[:0:-1], self._taps])
        for d in range(5):
            grid = convolve1d(grid, full, axis=d, mode="constant", cval=0.0)
        return grid.ravel()

    def _blur_sparse(self, cells: np.ndarray) -> np.ndarray:
        m = self._n_cells
        taps = self._taps
        vals = np.concatenate([cells, [0.0]])  # sentinel row m stays zero
        for d in range(5):
            blurred = taps[0] * vals
            for o in range(1, self._radius + 1):
                blurred[:m] += taps[o] * (vals[self._plus[d, o - 1]]
                                          + vals[self._minus[d, o - 1]])
            blurred[m] = 0.0
            vals = blurred
        return vals[:m]


class BilateralGrid:
    """Bilateral filter for one image; reusable across filter calls.

    The geometry (splat indices, blur structure, slice weights) depends
    only on the image and the sigmas, so mean-field inference builds it
    once and filters one scalar field per iteration.
    """

    def __init__(self, image: RgbImage, sigma_xy: float, sigma_rgb: float,
                 grid_scale: Optional[float] = None, order: Optional[int] = None):
        ensure_rgb_image(image)
        if not sigma_xy > 0 or not sigma_rgb > 0:
            raise ParameterError("bilateral sigmas must be > 0")
        if grid_scale is not None and not 0.0 < grid_scale <= 1.0:
            raise ParameterError(f"grid_scale must be in (0, 1], got {grid_scale}")
        if order is not None and order not in (1, 2):
            raise ParameterError(f"spline order must be 1 or 2, got {order}")
        h, w = image.shape[:2]
        n = h * w
        self.shape = (h, w)

        if n <= MAX_PLANES_PIXELS:
            self.mode = "planes"
            self._engine = _PlanesEngine(image, sigma_xy, sigma_rgb,
                                         color_scale=grid_scale or 1.0 / 3.0)
        elif n <= MAX_DENSE_PIXELS:
            self.mode = "dense-grid"
            self._engine = _GridEngine(image, sigma_xy, sigma_rgb,
                                       grid_scale or 0.5, order or 2)
        else:
            # big inputs: sparse cells; dense boxes only as the coarsening
            # fallback for cell-count blowups (see _GridEngine)
            self.mode = "sparse-grid"
            self._engine = _GridEngine(image, sigma_xy, sigma_rgb,
                                       grid_scale or 0.5, order or 1,
                                       allow_dense=False)
        self.self_weight = self._engine.self_weight

    def filter(self, field: np.ndarray) -> np.ndarray:
        """Approximate sum_j k(i, j) field_j, self term included."""
        if field.shape[:2] != self.shape:
            raise ParameterError(
                f"field shape {field.shape[:2]} does not match grid {self.shape}")
        h, w = self.shape
        if field.ndim == 2:
            return self._engine.filter1(
                field.reshape(-1).astype(np.float64)).reshape(h, w)
        out = np.empty_like(field, dtype=np.float64)
        for ch in range(field.shape[2]):
            out[..., ch] = self._engine.filter1(
                field[..., ch].reshape(-1).astype(np.float64)).reshape(h, w)
        return out


def _locate(sorted_keys: np.ndarray, queries: np.ndarray, sentinel: int) -> np.ndarray:
    pos = np.searchsorted(sorted_keys, queries)
    pos_c = np.minimum(pos, sorted_keys.size - 1)
    hit = sorted_keys[pos_c] == queries
    return np.where(hit, pos_c, sentinel)


def dense_bilateral_kernel(image: RgbImage, sigma_xy: float, sigma_rgb: float) -> np.ndarray:
    """Exact (N, N) bilateral kernel matrix with zero diagonal. Test-scale only."""
    ensure_rgb_image(image)
    h, w = image.shape[:2]
    n = h * w
    yy, xx = np.mgrid[0:h, 0:w]
    pos = np.stack([yy.ravel(), xx.ravel()], axis=1).astype(np.float64)
    col = image.reshape(n, 3).astype(np.float64)
    d_pos = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)
    d_col = ((col[:, None, :] - col[None, :, :]) ** 2).sum(axis=2)
    k = np.exp(-d_pos / (2 * sigma_xy ** 2) - d_col / (2 * sigma_rgb ** 2))
    np.fill_diagonal(k, 0.0)
    return k


def dense_spatial_kernel(h: int, w: int, sigma_xy: float) -> np.ndarray:
    """Exact (N, N) spatial Gaussian kernel with zero diagonal. Test-scale only."""
    yy, xx = np.mgrid[0:h, 0:w]
    pos = np.stack([yy.ravel(), xx.ravel()], axis=1).astype(np.float64)
    d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)
    k = np.exp(-d2 / (2 * sigma_xy ** 2))
    np.fill_diagonal(k, 0.0)
    return k
