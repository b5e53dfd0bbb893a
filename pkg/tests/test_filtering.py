import numpy as np
import pytest

from box2mask.errors import ParameterError
from box2mask.filtering import (BilateralGrid, dense_bilateral_kernel,
                                dense_spatial_kernel, gaussian_filter_2d)


def test_spatial_filter_matches_dense_kernel():
    """Truncation covers the whole image here, so the match is near exact."""
    rng = np.random.default_rng(0)
    for _ in range(5):
        field = rng.random((9, 11))
        out = gaussian_filter_2d(field, sigma=4.0) - field
        k = dense_spatial_kernel(9, 11, 4.0)
        ref = (k @ field.ravel()).reshape(9, 11)
        assert np.abs(out - ref).max() < 1e-10


def test_spatial_filter_zero_padding():
    field = np.zeros((5, 5))
    field[2, 2] = 1.0
    out = gaussian_filter_2d(field, sigma=1.0)
    # corner value is exp(-(2^2+2^2)/2) of the center impulse
    assert out[0, 0] == pytest.approx(np.exp(-4.0), rel=1e-12)
    assert out[2, 2] == pytest.approx(1.0 + 0.0, abs=1e-12)


def test_bilateral_grid_accuracy_by_mode():
    rng = np.random.default_rng(1)
    # tiny image -> planes engine, tight tolerance
    img = rng.integers(0, 256, (12, 12, 3)).astype(np.uint8)
    field = rng.random((12, 12)) * 2 - 1
    grid = BilateralGrid(img, 25.0, 10.0)
    assert grid.mode == "planes"
    fast = grid.filter(field) - grid.self_weight * field
    ref = (dense_bilateral_kernel(img, 25.0, 10.0) @ field.ravel()).reshape(12, 12)
    scale = np.abs(ref).max() + 1e-12
    assert np.abs(fast - ref).max() / scale < 0.01

    # mid-size image -> dense 5D grid
    img = np.zeros((24, 24, 3), np.uint8)
    img[:, :12] = (200, 50, 40)
    img[:, 12:] = (30, 70, 180)
    img = np.clip(img.astype(int) + rng.integers(-5, 6, img.shape), 0, 255).astype(np.uint8)
    field = rng.random((24, 24)) * 2 - 1
    grid = BilateralGrid(img, 25.0, 10.0)
    assert grid.mode == "dense-grid"
    fast = grid.filter(field) - grid.self_weight * field
    ref = (dense_bilateral_kernel(img, 25.0, 10.0) @ field.ravel()).reshape(24, 24)
    scale = np.abs(ref).max() + 1e-12
    assert np.abs(fast - ref).max() / scale < 0.02


def test_sparse_mode_reasonable_on_structured_image():
    # force the sparse engine by image size; structured content keeps the
    # occupied cells coherent, which is its design regime
    rng = np.random.default_rng(2)
    h, w = 160, 512  # > MAX_DENSE_PIXELS
    img = np.zeros((h, w, 3), np.uint8)
    img[:, : w // 2] = (190, 60, 50)
    img[:, w // 2:] = (40, 60, 170)
    img = np.clip(img.astype(int) + rng.integers(-5, 6, img.shape), 0, 255).astype(np.uint8)
    grid = BilateralGrid(img, 25.0, 10.0)
    assert grid.mode == "sparse-grid"
    field = rng.random((h, w)) * 2 - 1
    out = grid.filter(field)
    # spot-check 80 random pixels against the exact sum
    yy, xx = np.mgrid[0:h, 0:w]
    pos = np.stack([yy.ravel(), xx.ravel()], axis=1).astype(np.float64)
    col = img.reshape(-1, 3).astype(np.float64)
    idx = rng.integers(0, h * w, 80)
    exact = np.empty(idx.size)
    for j, i in enumerate(idx):
        k = np.exp(-((pos[i] - pos) ** 2).sum(1) / (2 * 25.0 ** 2)
                   - ((col[i] - col) ** 2).sum(1) / (2 * 10.0 ** 2))
        exact[j] = float(k @ field.ravel())
    err = np.abs(out.ravel()[idx] - exact)
    # error relative to the message scale; random fields cancel to ~0 at
    # some pixels, so per-pixel relative error is meaningless there
    assert err.max() / np.abs(exact).max() < 0.15


def test_incremental_splat_matches_fresh():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, (20, 20, 3)).astype(np.uint8)
    grid = BilateralGrid(img, 25.0, 10.0)
    f1 = rng.random((20, 20))
    f2 = f1.copy()
    f2[5:8, 5:8] += 0.25  # sparse change triggers the delta path
    out_incr_1 = grid.filter(f1)
    out_incr_2 = grid.filter(f2)
    fresh = BilateralGrid(img, 25.0, 10.0)
    assert np.allclose(out_incr_2, fresh.filter(f2), atol=1e-9)
    assert np.allclose(out_incr_1, BilateralGrid(img, 25.0, 10.0).filter(f1), atol=1e-9)


def test_grid_parameter_validation():
    img = np.zeros((4, 4, 3), dtype=np.uint8)
    with pytest.raises(ParameterError):
        BilateralGrid(img, 0.0, 10.0)
    with pytest.raises(ParameterError):
        BilateralGrid(img, 25.0, 10.0, grid_scale=1.5)
    with pytest.raises(ParameterError):
        BilateralGrid(img, 25.0, 10.0, order=3)
    with pytest.raises(ParameterError):
        gaussian_filter_2d(np.zeros((3, 3)), sigma=-1.0)


def test_self_weight_close_to_one():
    # the grid's self coupling approximates k(i, i) = 1
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, (10, 14, 3)).astype(np.uint8)
    grid = BilateralGrid(img, 25.0, 10.0)
    assert np.abs(grid.self_weight - 1.0).max() < 0.05
