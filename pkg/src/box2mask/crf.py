"""Fully-connected binary CRF over pixels, refined by mean-field inference.

Energy of a labeling x:

    E(x) = sum_i u_i(x_i) + sum_{i<j} [x_i != x_j] * (w_g k_g(i,j) + w_b k_b(i,j))

with a spatial Gaussian kernel k_g and a color+position bilateral kernel
k_b, both unnormalized, and a Potts disagreement cost. The unary u comes
from the input mask: the labeled class gets probability p, the other
1 - p, and costs are negative log probabilities.

mean_field_refine is the production path (separable convolution +
sparse bilateral grid). mean_field_refine_dense does the O(N^2) sums
exactly and exists as the small-image correctness oracle, as does
gibbs_energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import expit

from .errors import ParameterError, ValidationError
from .filtering import (BilateralGrid, dense_bilateral_kernel, dense_spatial_kernel,
                        gaussian_filter_2d)
from .types import (BinaryMask, RgbImage, ensure_binary_mask, ensure_rgb_image,
                    ensure_same_shape)

IterationHook = Callable[[int, np.ndarray], None]


@dataclass(frozen=True)
class CrfParams:
    gaussian_sxy: float = 5.0
    gaussian_weight: float = 3.0
    bilateral_sxy: float = 25.0
    bilateral_srgb: float = 10.0
    bilateral_weight: float = 10.0
    iterations: int = 5
    unary_confidence: float = 0.9
    # bilateral grid tuning: cell size in sigma units and spline order;
    # None picks both by image size (fine quadratic small, coarse linear large)
    bilateral_grid_scale: Optional[float] = None
    bilateral_grid_order: Optional[int] = None

    def __post_init__(self):
        if not self.gaussian_sxy > 0 or not self.bilateral_sxy > 0 or not self.bilateral_srgb > 0:
            raise ParameterError("kernel standard deviations must be > 0")
        if self.gaussian_weight < 0 or self.bilateral_weight < 0:
            raise ParameterError("kernel weights must be >= 0")
        if self.iterations < 0:
            raise ParameterError(f"iterations must be >= 0, got {self.iterations}")
        if not 0.5 < self.unary_confidence < 1.0:
            raise ParameterError(
                f"unary_confidence must be in (0.5, 1), got {self.unary_confidence}")


@dataclass(frozen=True)
class UnaryPotentials:
    """Per-pixel negative log probabilities, channel 0 = background."""

    costs: np.ndarray  # (H, W, 2) float64

    def __post_init__(self):
        c = self.costs
        if c.ndim != 3 or c.shape[2] != 2:
            raise ValidationError(f"unary costs must be (H, W, 2), got {c.shape}")
        if not np.isfinite(c).all():
            raise ValidationError("unary costs must be finite")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.costs.shape[:2]


def unary_from_mask(mask: BinaryMask, p: float) -> UnaryPotentials:
    """Confidence-p unary: the mask's label gets probability p, the other 1-p."""
    ensure_binary_mask(mask)
    if not 0.5 < p < 1.0:
        raise ParameterError(f"unary confidence p must be in (0.5, 1), got {p}")
    fg = mask.astype(bool)
    costs = np.empty(mask.shape + (2,), dtype=np.float64)
    costs[..., 0] = np.where(fg, -np.log(1.0 - p), -np.log(p))
    costs[..., 1] = np.where(fg, -np.log(p), -np.log(1.0 - p))
    return UnaryPotentials(costs)


def _softmax2(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_triplet(image: RgbImage, unary: UnaryPotentials) -> None:
    ensure_rgb_image(image)
    ensure_same_shape(image, unary.costs, "image and unary potentials")


def mean_field_refine(image: RgbImage, unary: UnaryPotentials, params: CrfParams,
                      on_iteration: Optional[IterationHook] = None,
                      ) -> Tuple[BinaryMask, np.ndarray]:
    """Mean-field inference with filtered message passing.

    Returns (argmax mask, final marginals (H, W, 2)). iterations = 0
    returns the unary argmax untouched.

    With two labels and Potts compatibility the update only depends on
    the filtered marginal difference, so one scalar field is filtered
    per kernel per iteration:

        delta_i = (u_i(0) - u_i(1)) - sum_m w_m sum_{j != i} k_m(i,j) D_j
        Q_i(1)  = sigmoid(delta_i),  D = Q(0) - Q(1)

    which is algebraically the usual softmax over per-label logits.
    """
    _check_triplet(image, unary)
    delta_u = unary.costs[..., 0] - unary.costs[..., 1]
    q1 = expit(delta_u)

    use_g = params.gaussian_weight > 0
    use_b = params.bilateral_weight > 0
    grid = None
    if use_b and params.iterations > 0:
        grid = BilateralGrid(image, params.bilateral_sxy, params.bilateral_srgb,
                             params.bilateral_grid_scale, params.bilateral_grid_order)

    for it in range(params.iterations):
        d = 1.0 - 2.0 * q1  # Q(0) - Q(1)
        msg = np.zeros_like(d)
        if use_g:
            msg += params.gaussian_weight * (gaussian_filter_2d(d, params.gaussian_sxy) - d)
        if use_b:
            msg += params.bilateral_weight * (grid.filter(d) - grid.self_weight * d)
        q1 = expit(delta_u - msg)
        if on_iteration is not None:
            on_iteration(it, np.stack([1.0 - q1, q1], axis=-1))

    q = np.stack([1.0 - q1, q1], axis=-1)
    mask = (q1 > 0.5).astype(np.uint8)
    return mask, q


def mean_field_refine_dense(image: RgbImage, unary: UnaryPotentials, params: CrfParams,
                            max_pixels: int = 4096,
                            on_iteration: Optional[IterationHook] = None,
                            ) -> Tuple[BinaryMask, np.ndarray]:
    """Reference mean-field path with exact O(N^2) pairwise sums.

    Same update rule as mean_field_refine; kernels are evaluated
    pairwise with no approximation. Refuses images above max_pixels.
    """
    _check_triplet(image, unary)
    h, w = image.shape[:2]
    if h * w > max_pixels:
        raise ParameterError(
            f"dense mean-field is O(N^2); {h}x{w} exceeds the {max_pixels}-pixel bound")

    kernel = _combined_kernel(image, params)
    q = _softmax2(-unary.costs)
    for it in range(params.iterations):
        msg = (kernel @ q.reshape(-1, 2)).reshape(h, w, 2)
        q = _softmax2(-unary.costs - msg[..., ::-1])
        if on_iteration is not None:
            on_iteration(it, q)

    mask = (q[..., 1] > q[..., 0]).astype(np.uint8)
    return mask, q


def _combined_kernel(image: RgbImage, params: CrfParams) -> np.ndarray:
    """w_g k_g + w_b k_b as a dense zero-diagonal matrix."""
    h, w = image.shape[:2]
    n = h * w
    kernel = np.zeros((n, n), dtype=np.float64)
    if params.gaussian_weight > 0:
        kernel += params.gaussian_weight * dense_spatial_kernel(h, w, params.gaussian_sxy)
    if params.bilateral_weight > 0:
        kernel += params.bilateral_weight * dense_bilateral_kernel(
            image, params.bilateral_sxy, params.bilateral_srgb)
    return kernel


def gibbs_energy(labeling: BinaryMask, unary: UnaryPotentials, image: RgbImage,
                 params: CrfParams, max_pixels: int = 4096) -> float:
    """Exact E(x) = sum_i u_i(x_i) + sum_{i<j} [x_i != x_j] w_m k_m(i,j).

    O(N^2); refuses images above max_pixels (default 64x64).
    """
    ensure_binary_mask(labeling)
    _check_triplet(image, unary)
    ensure_same_shape(labeling, image, "labeling and image")
    h, w = image.shape[:2]
    if h * w > max_pixels:
        raise ParameterError(
            f"gibbs_energy is O(N^2); {h}x{w} exceeds the {max_pixels}-pixel bound")

    x = labeling.ravel().astype(np.int64)
    unary_term = float(unary.costs.reshape(-1, 2)[np.arange(x.size), x].sum())

    kernel = _combined_kernel(image, params)
    disagree = (x[:, None] != x[None, :])
    pairwise_term = 0.5 * float(kernel[disagree].sum())
    return unary_term + pairwise_term
